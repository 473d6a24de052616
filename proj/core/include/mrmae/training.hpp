#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mrmae/dataset.hpp"
#include "mrmae/masking.hpp"
#include "mrmae/nnet.hpp"

namespace mrmae {

enum class LossBase { L1, L2 };

std::string loss_base_name(LossBase base);
LossBase loss_base_from_name(const std::string& name);

// Reconstruction loss with higher emphasis on masked features:
// scalar = (masked_weight * sum_{j in M} l_j + unmasked_weight * sum_{j not in M} l_j) / n.
struct LossConfig {
    LossBase base = LossBase::L1;
    double masked_weight = 1.0;
    double unmasked_weight = 0.1;

    void validate() const;
};

struct MaskedLossResult {
    double scalar = 0.0;
    std::vector<double> per_feature;   // l_j = |p_j - x_j| or (p_j - x_j)^2
    double masked_component = 0.0;     // masked_weight * sum_M l_j / n
    double unmasked_component = 0.0;   // unmasked_weight * sum_!M l_j / n
};

MaskedLossResult masked_loss(std::span<const double> truth, std::span<const double> prediction,
                             const Mask& mask, const LossConfig& cfg);

// Variant that drops features whose ground truth is unknown (sorted index
// list): they contribute zero loss and zero gradient; the divisor stays n.
MaskedLossResult masked_loss_excluding(std::span<const double> truth,
                                       std::span<const double> prediction, const Mask& mask,
                                       const LossConfig& cfg,
                                       std::span<const std::size_t> excluded);

// d(scalar)/dp. For L1 the subgradient at p_j == x_j is 0.
std::vector<double> masked_loss_gradient(std::span<const double> truth,
                                         std::span<const double> prediction, const Mask& mask,
                                         const LossConfig& cfg,
                                         std::span<const std::size_t> excluded = {});

struct TrainConfig {
    std::size_t epochs = 100;
    std::size_t batch_size = 32;
    MaskPolicy policy = MaskPolicy::fixed_fraction(0.7, 0);
    LossConfig loss;
    OptimConfig optim{OptimKind::Sgd, 0.01, 0.9};
    std::uint64_t seed = 0;
    std::vector<std::size_t> hidden_dims; // empty -> {4n, 4n}
    Activation activation = Activation::Relu;

    void validate() const;
};

struct EpochStats {
    std::size_t epoch = 0;
    double mean_loss = 0.0;
    double masked_loss = 0.0;
    double unmasked_loss = 0.0;
    // Split means when pseudo-row flags were provided; NaN otherwise.
    double observed_loss = 0.0;
    double pseudo_loss = 0.0;
};

struct TrainResult {
    MlpModel model;
    FeatureMeans means;
    std::vector<EpochStats> log;
};

using EpochCallback = std::function<void(const MlpModel&, const EpochStats&)>;

struct TrainExtras {
    const std::vector<double>* row_weights = nullptr;     // per observation index
    const std::vector<std::uint8_t>* pseudo_rows = nullptr; // 1 = pseudo-labeled row
    EpochCallback callback;
};

// The three-step loop: per observation draw a fresh mask, impute with the
// training means, predict, weight the loss towards masked features, update.
// Missing entries are force-masked on input and excluded from the loss.
// Deterministic for a fixed config (single writer, fixed iteration order).
TrainResult train(const LayeredDataset& dataset, const TrainConfig& cfg,
                  const TrainExtras& extras = {});

// epoch,mean_loss,masked_loss,unmasked_loss (plus observed/pseudo columns
// when any row was flagged pseudo).
void write_training_log_csv(const std::filesystem::path& path,
                            const std::vector<EpochStats>& log, bool with_pseudo_columns);

} // namespace mrmae
