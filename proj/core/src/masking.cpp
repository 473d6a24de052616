#include "mrmae/masking.hpp"

#include <algorithm>
#include <cmath>

#include <nlohmann/json.hpp>

#include "mrmae/errors.hpp"

namespace mrmae {

using json = nlohmann::json;

Mask Mask::from_indices(std::vector<std::uint32_t> indices, std::size_t n) {
    std::sort(indices.begin(), indices.end());
    indices.erase(std::unique(indices.begin(), indices.end()), indices.end());
    if (!indices.empty() && indices.back() >= n) {
        throw Error("mask index " + std::to_string(indices.back()) + " out of range for n=" +
                    std::to_string(n));
    }
    return Mask{std::move(indices)};
}

bool Mask::contains(std::uint32_t j) const {
    return std::binary_search(members.begin(), members.end(), j);
}

bool Mask::is_superset_of(const Mask& other) const {
    return std::includes(members.begin(), members.end(), other.members.begin(), other.members.end());
}

Mask Mask::set_minus(const Mask& other) const {
    Mask out;
    std::set_difference(members.begin(), members.end(), other.members.begin(), other.members.end(),
                        std::back_inserter(out.members));
    return out;
}

Mask Mask::set_union(const Mask& other) const {
    Mask out;
    std::set_union(members.begin(), members.end(), other.members.begin(), other.members.end(),
                   std::back_inserter(out.members));
    return out;
}

MaskPolicy MaskPolicy::fixed_fraction(double p, std::uint64_t seed) {
    if (!(p >= 0.0 && p < 1.0)) {
        throw ConfigError("fixed_fraction: p must be in [0,1), got " + std::to_string(p));
    }
    MaskPolicy policy;
    policy.kind = MaskPolicyKind::FixedFraction;
    policy.p = p;
    policy.seed = seed;
    return policy;
}

MaskPolicy MaskPolicy::uniform_fraction(double lo, double hi, std::uint64_t seed) {
    if (!(lo >= 0.0 && lo <= hi && hi < 1.0)) {
        throw ConfigError("uniform_fraction: need 0 <= lo <= hi < 1, got [" + std::to_string(lo) +
                          ", " + std::to_string(hi) + "]");
    }
    MaskPolicy policy;
    policy.kind = MaskPolicyKind::UniformFraction;
    policy.lo = lo;
    policy.hi = hi;
    policy.seed = seed;
    return policy;
}

MaskPolicy MaskPolicy::layer_subset(double q, std::uint64_t seed) {
    if (!(q >= 0.0 && q <= 1.0)) {
        throw ConfigError("layer_subset: q must be in [0,1], got " + std::to_string(q));
    }
    // q = 1 over the all-layer scope would mask everything on every draw and
    // the all-masked resampling loop could never terminate.
    if (q == 1.0) {
        throw ConfigError("layer_subset: q = 1.0 masks every layer on every draw; rejected");
    }
    MaskPolicy policy;
    policy.kind = MaskPolicyKind::LayerSubset;
    policy.q = q;
    policy.seed = seed;
    return policy;
}

std::string MaskPolicy::kind_name() const {
    switch (kind) {
    case MaskPolicyKind::FixedFraction: return "fixed_fraction";
    case MaskPolicyKind::UniformFraction: return "uniform_fraction";
    case MaskPolicyKind::LayerSubset: return "layer_subset";
    }
    return "?";
}

std::string MaskPolicy::to_json() const {
    json doc;
    doc["kind"] = kind_name();
    doc["seed"] = seed;
    switch (kind) {
    case MaskPolicyKind::FixedFraction: doc["p"] = p; break;
    case MaskPolicyKind::UniformFraction:
        doc["lo"] = lo;
        doc["hi"] = hi;
        break;
    case MaskPolicyKind::LayerSubset: doc["q"] = q; break;
    }
    return doc.dump();
}

MaskPolicy MaskPolicy::from_json(const std::string& text) {
    json doc;
    try {
        doc = json::parse(text);
    } catch (const json::exception& e) {
        throw ConfigError(std::string("mask policy: ") + e.what());
    }
    try {
        const auto kind = doc.at("kind").get<std::string>();
        const std::uint64_t seed = doc.value("seed", 0ULL);
        if (kind == "fixed_fraction") return fixed_fraction(doc.at("p").get<double>(), seed);
        if (kind == "uniform_fraction") {
            return uniform_fraction(doc.at("lo").get<double>(), doc.at("hi").get<double>(), seed);
        }
        if (kind == "layer_subset") return layer_subset(doc.at("q").get<double>(), seed);
        throw ConfigError("mask policy: unknown kind '" + kind + "'");
    } catch (const json::exception& e) {
        throw ConfigError(std::string("mask policy: ") + e.what());
    }
}

std::size_t mask_target_size(double fraction, std::size_t n) {
    return static_cast<std::size_t>(std::floor(fraction * static_cast<double>(n) + 0.5));
}

namespace {

// Uniform k-subset of [0, n) via a partial Fisher-Yates pass.
std::vector<std::uint32_t> sample_subset(std::size_t k, std::size_t n, Rng& rng) {
    std::vector<std::uint32_t> pool(n);
    for (std::size_t i = 0; i < n; ++i) pool[i] = static_cast<std::uint32_t>(i);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    return pool;
}

Mask sample_layer_mask(double q, std::size_t n, std::span<const LayerRange> partition, Rng& rng) {
    if (partition.empty()) throw Error("layer_subset sampling requires a layer partition");
    for (;;) {
        std::vector<std::uint32_t> members;
        std::size_t masked_layers = 0;
        for (const auto& range : partition) {
            if (rng.unit() < q) {
                ++masked_layers;
                for (std::size_t j = range.begin; j < range.end; ++j) {
                    members.push_back(static_cast<std::uint32_t>(j));
                }
            }
        }
        if (masked_layers == partition.size()) continue; // all-masked draw: resample
        return Mask::from_indices(std::move(members), n);
    }
}

} // namespace

Mask sample_mask(const MaskPolicy& policy, std::size_t n,
                 std::span<const LayerRange> layer_partition, Rng& rng) {
    if (n == 0) throw Error("sample_mask: n must be >= 1");
    switch (policy.kind) {
    case MaskPolicyKind::FixedFraction:
        return Mask::from_indices(sample_subset(mask_target_size(policy.p, n), n, rng), n);
    case MaskPolicyKind::UniformFraction: {
        const double fraction = rng.uniform(policy.lo, policy.hi);
        return Mask::from_indices(sample_subset(mask_target_size(fraction, n), n, rng), n);
    }
    case MaskPolicyKind::LayerSubset:
        return sample_layer_mask(policy.q, n, layer_partition, rng);
    }
    throw Error("sample_mask: unreachable");
}

std::vector<double> apply_mask(std::span<const double> x, const Mask& mask,
                               const FeatureMeans& means) {
    std::vector<double> f(x.begin(), x.end());
    apply_mask_inplace(f, mask, means);
    return f;
}

void apply_mask_inplace(std::span<double> x, const Mask& mask, const FeatureMeans& means) {
    if (x.size() != means.means.size()) {
        throw Error("apply_mask: vector length " + std::to_string(x.size()) +
                    " does not match means length " + std::to_string(means.means.size()));
    }
    for (std::uint32_t j : mask.members) {
        if (j >= x.size()) throw Error("apply_mask: mask index out of range");
        x[j] = means.means[j];
    }
}

Mask sample_superset_mask(const Mask& base, const MaskPolicy& policy, std::size_t n,
                          std::span<const LayerRange> layer_partition, Rng& rng) {
    if (base.size() >= n) throw PolicyError("superset mask: base mask already covers all features");

    if (policy.kind == MaskPolicyKind::LayerSubset) {
        constexpr int kMaxResamples = 1024;
        for (int attempt = 0; attempt < kMaxResamples; ++attempt) {
            const Mask layers = sample_layer_mask(policy.q, n, layer_partition, rng);
            Mask combined = base.set_union(layers);
            if (combined.size() < n) return combined;
        }
        throw PolicyError("superset mask: base union layer mask always covers all features");
    }

    double fraction = policy.p;
    if (policy.kind == MaskPolicyKind::UniformFraction) {
        fraction = rng.uniform(policy.lo, policy.hi);
    }
    const std::size_t target = mask_target_size(fraction, n);
    if (target < base.size()) {
        throw PolicyError("ensemble fraction below given-mask fraction: target " +
                          std::to_string(target) + " < base " + std::to_string(base.size()));
    }

    std::vector<std::uint32_t> complement;
    complement.reserve(n - base.size());
    for (std::uint32_t j = 0; j < n; ++j) {
        if (!base.contains(j)) complement.push_back(j);
    }
    const std::size_t extra = target - base.size();
    for (std::size_t i = 0; i < extra; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(complement.size() - i));
        std::swap(complement[i], complement[j]);
    }
    std::vector<std::uint32_t> members = base.members;
    members.insert(members.end(), complement.begin(), complement.begin() + static_cast<std::ptrdiff_t>(extra));
    return Mask::from_indices(std::move(members), n);
}

} // namespace mrmae
