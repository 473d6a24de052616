#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mrmae/masking.hpp"
#include "mrmae/nnet.hpp"

namespace mrmae {

// Implicit ensemble: l forward passes under random supersets of the given
// mask, averaged. Only the mean aggregator is built; Aggregator is the
// one-method extension point.
struct EnsembleConfig {
    std::size_t iterations = 32;
    MaskPolicy policy = MaskPolicy::fixed_fraction(0.6, 0);
    std::uint64_t seed = 0;
    std::size_t workers = 1;

    void validate() const;
};

using Aggregator = std::function<std::vector<double>(const std::vector<std::vector<double>>&)>;

std::vector<double> mean_aggregate(const std::vector<std::vector<double>>& members);

// Receives each member prediction q_i in iteration order (used by the CLI's
// --dump-members and by determinism checks).
using MemberSink = std::function<void(std::size_t iteration, const Mask& mask_i,
                                      std::span<const double> q_i)>;

// x_masked must already equal apply_mask(x, base_mask, means). Iteration i
// draws M_i ⊇ base_mask with its own derived seed, so results do not depend
// on the worker count; members are aggregated in iteration order.
std::vector<double> ensemble_predict(const MlpModel& model, std::span<const double> x_masked,
                                     const Mask& base_mask, const FeatureMeans& means,
                                     std::span<const LayerRange> layer_partition,
                                     const EnsembleConfig& cfg,
                                     const MemberSink& sink = nullptr);

} // namespace mrmae
