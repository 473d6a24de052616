#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mrmae/dataset.hpp"
#include "mrmae/manifest.hpp"

namespace mrmae {

struct FeatureRef {
    std::string layer;
    std::size_t row = 0;
    std::size_t col = 0;
};

struct SynthTerm {
    enum class Kind { Linear, Product };
    Kind kind = Kind::Linear;
    double coef = 1.0;
    FeatureRef a;
    std::size_t lag_a = 0;
    FeatureRef b;      // Product only
    std::size_t lag_b = 0;
};

struct SynthFeature {
    FeatureRef where;
    double noise_sigma = 1.0;
    std::vector<SynthTerm> terms;
};

struct SynthLayer {
    std::string name;
    std::size_t patch_rows = 1;
    std::size_t patch_cols = 1;
    double drift = 0.0;                      // added as drift * month_index
    std::vector<std::size_t> missing_months; // grid files not written for these indices
};

// Planted-dependency generator: each feature is a formula over other
// features (linear mixes, products, optional lags) plus Gaussian noise and a
// per-layer linear trend. Features without an entry are pure noise sigma 1.
struct SyntheticSpec {
    std::uint64_t seed = 0;
    std::size_t k = 0; // timestamps (months)
    std::size_t patch_size = 1;
    int start_year = 2000;
    int start_month = 1;
    std::vector<SynthLayer> layers;
    std::vector<SynthFeature> features;

    void validate() const; // rejects cyclic same-time dependencies
};

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path);

struct SynthData {
    LayerManifest manifest; // grid dims = patch grid * patch_size
    std::size_t num_features = 0;
    std::vector<double> values; // k x n, feature order = manifest order
};

// Deterministic: noise is drawn in (timestamp, feature-index) order before
// formulas are evaluated in dependency order, so regeneration is
// byte-identical. Lagged references before t=0 read as 0.
SynthData generate_synthetic(const SyntheticSpec& spec);

// Emits manifest.json, one .f32 grid per (layer, month) with the patch value
// replicated across each patch block, and dependency_graph.json with the
// ground-truth formulas.
void write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir);

// Builds a ready LayeredDataset (not yet normalized) straight from a value
// matrix; layer dims given as (name, patch_rows, patch_cols).
LayeredDataset dataset_from_matrix(
    const std::vector<std::tuple<std::string, std::size_t, std::size_t>>& layers,
    std::vector<double> values, std::size_t num_observations,
    std::vector<YearMonth> timestamps, std::size_t test_months);

// Consecutive months starting at (year, month).
std::vector<YearMonth> month_range(int start_year, int start_month, std::size_t count);

} // namespace mrmae
