#pragma once

#include <cstddef>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "mrmae/grid.hpp"
#include "mrmae/manifest.hpp"

namespace mrmae {

enum class Split { Train, Test };

// Contiguous block of feature indices belonging to one layer, laid out as a
// patch_rows x patch_cols grid in row-major order.
struct LayerRange {
    std::string name;
    std::size_t begin = 0;
    std::size_t end = 0; // exclusive
    std::size_t patch_rows = 0;
    std::size_t patch_cols = 0;

    std::size_t size() const { return end - begin; }
};

struct FeatureCoord {
    std::size_t layer = 0; // index into layer_partition
    std::size_t patch_row = 0;
    std::size_t patch_col = 0;
};

struct NormStats {
    double mean = 0.0;
    double std = 1.0; // population convention (divide by count)
};

// All grids for one manifest, indexed [layer][timestamp]; grids that were
// missing on disk are all-sentinel.
struct GridStack {
    LayerManifest manifest;
    std::vector<std::vector<Grid>> grids;
};

// k observations x n features, layers as contiguous index ranges. Feature
// order is manifest layer order, patches row-major within a layer. Missing
// entries are NaN. Immutable after construction in normal use.
struct LayeredDataset {
    std::vector<double> data; // k*n, row-major
    std::size_t num_observations = 0;
    std::size_t num_features = 0;
    std::vector<LayerRange> layer_partition;
    std::vector<FeatureCoord> feature_coords;
    std::vector<YearMonth> timestamps;
    std::vector<Split> split;
    std::vector<NormStats> norm_stats; // per layer, set by normalize_layers
    bool normalized = false;

    std::span<const double> row(std::size_t i) const {
        return {data.data() + i * num_features, num_features};
    }
    std::span<double> row(std::size_t i) {
        return {data.data() + i * num_features, num_features};
    }
    double value(std::size_t i, std::size_t j) const { return data[i * num_features + j]; }

    std::size_t feature_index(std::size_t layer, std::size_t patch_row, std::size_t patch_col) const;
    const LayerRange& layer_of_feature(std::size_t j) const;
    std::size_t layer_index(const std::string& name) const; // throws ConfigError

    std::vector<std::size_t> train_rows() const;
    std::vector<std::size_t> test_rows() const;
    std::vector<std::size_t> missing_in_row(std::size_t i) const;

    void validate_partition() const; // layer ranges disjoint and covering [0, n)
};

struct FeatureMeans {
    std::vector<double> means;
    std::string source = "train-split";
};

// Reads every (layer, timestamp) grid named by the manifest; a file that is
// absent becomes an all-sentinel grid rather than an error.
GridStack load_grids(const std::filesystem::path& manifest_path,
                     const std::filesystem::path& grids_dir);

// Patch-averages the stack into a flat dataset. The trailing test_months
// timestamps form the test split (clamped to leave at least one training row).
LayeredDataset build_dataset(const GridStack& stack, std::size_t test_months);

// Per-layer (v - mean) / std with stats from the training split only, applied
// to both splits. Population standard deviation. Throws DataError naming the
// layer if the layer has (near-)zero variance on the training split.
LayeredDataset normalize_layers(const LayeredDataset& dataset);

// Training-split mean per feature, skipping missing entries; a feature with
// no observed training value gets 0 (the post-normalization layer mean).
FeatureMeans compute_feature_means(const LayeredDataset& dataset);

// CSV with header timestamp,layer,patch_row,patch_col,value. Missing entries
// export as empty value fields.
void export_dataset_csv(const std::filesystem::path& path, const LayeredDataset& dataset);

// Fingerprint of per-layer normalization stats, recorded in checkpoints.
std::uint64_t norm_stats_hash(const LayeredDataset& dataset);

} // namespace mrmae
