#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mrmae/dataset.hpp"
#include "mrmae/rng.hpp"

namespace mrmae {

// Set of masked feature indices, kept sorted and duplicate-free.
struct Mask {
    std::vector<std::uint32_t> members;

    static Mask from_indices(std::vector<std::uint32_t> indices, std::size_t n);
    static Mask empty() { return {}; }

    std::size_t size() const { return members.size(); }
    bool contains(std::uint32_t j) const;
    bool is_superset_of(const Mask& other) const;
    Mask set_minus(const Mask& other) const;
    Mask set_union(const Mask& other) const;
};

enum class MaskPolicyKind { FixedFraction, UniformFraction, LayerSubset };

// How masks are drawn: a fixed fraction of features, a per-call uniform
// fraction, or whole layers independently with probability q. Parameters are
// validated at construction; sampling itself cannot fail.
struct MaskPolicy {
    MaskPolicyKind kind = MaskPolicyKind::FixedFraction;
    double p = 0.0;  // fixed_fraction
    double lo = 0.0; // uniform_fraction
    double hi = 0.0;
    double q = 0.0;  // layer_subset
    std::uint64_t seed = 0;

    static MaskPolicy fixed_fraction(double p, std::uint64_t seed);
    static MaskPolicy uniform_fraction(double lo, double hi, std::uint64_t seed);
    static MaskPolicy layer_subset(double q, std::uint64_t seed);

    std::string kind_name() const;
    std::string to_json() const;
    static MaskPolicy from_json(const std::string& text);
};

// round-half-up of p*n; the mask size used by the fraction policies.
std::size_t mask_target_size(double fraction, std::size_t n);

Mask sample_mask(const MaskPolicy& policy, std::size_t n,
                 std::span<const LayerRange> layer_partition, Rng& rng);

// f_j = x_j outside the mask, means[j] inside it.
std::vector<double> apply_mask(std::span<const double> x, const Mask& mask,
                               const FeatureMeans& means);
void apply_mask_inplace(std::span<double> x, const Mask& mask, const FeatureMeans& means);

// Draws a mask containing base: fraction policies top the base up to the
// policy's target size with uniform draws from the complement; layer_subset
// unions base with a fresh layer mask. Throws PolicyError when the target
// size is below |base| or the union degenerates to all features.
Mask sample_superset_mask(const Mask& base, const MaskPolicy& policy, std::size_t n,
                          std::span<const LayerRange> layer_partition, Rng& rng);

} // namespace mrmae
