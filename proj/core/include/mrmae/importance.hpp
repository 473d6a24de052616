#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "mrmae/dataset.hpp"
#include "mrmae/masking.hpp"
#include "mrmae/nnet.hpp"
#include "mrmae/training.hpp"

namespace mrmae {

// Running-average table: cell (a, b) accumulates the loss of predicting the
// masked feature b while feature a was visible. The diagonal is never
// touched (a is visible, b is masked, so a != b).
struct LossMatrix {
    std::size_t n = 0;
    std::vector<double> sums;          // n*n
    std::vector<std::uint64_t> counts; // n*n
    std::vector<LayerRange> layer_partition;

    static LossMatrix zeros(std::size_t n, std::vector<LayerRange> partition);

    double sum_at(std::size_t a, std::size_t b) const { return sums[a * n + b]; }
    std::uint64_t count_at(std::size_t a, std::size_t b) const { return counts[a * n + b]; }
    bool defined(std::size_t a, std::size_t b) const { return count_at(a, b) > 0; }
    double average(std::size_t a, std::size_t b) const; // throws DataError if undefined

    void merge(const LossMatrix& other); // elementwise add (shard reduction)
};

enum class ObservationScope { Train, Test, All };

struct LossMatrixConfig {
    MaskPolicy policy = MaskPolicy::fixed_fraction(0.5, 0);
    std::size_t iterations = 100; // passes over the observations
    std::uint64_t seed = 0;
    LossBase loss = LossBase::L1; // unweighted per-feature loss
    ObservationScope scope = ObservationScope::All;
};

LossMatrix accumulate_loss_matrix(const MlpModel& model, const LayeredDataset& dataset,
                                  const FeatureMeans& means, const LossMatrixConfig& cfg);

enum class ImportanceMode { Feature, Layer, Global };

struct ImportanceQuery {
    ImportanceMode mode = ImportanceMode::Global;
    std::size_t target_feature = 0;  // Feature mode
    std::string target_layer;        // Layer mode
};

// Length-n importance vector in [0,1]: averaged losses, negated, min-max
// normalized over the defined entries. A single defined point maps to 0.
struct ImportanceReport {
    ImportanceQuery query;
    std::vector<double> importance;  // NaN where undefined
    std::vector<std::uint8_t> defined;
    std::vector<double> raw_average; // pre-normalization averages (NaN where undefined)
};

ImportanceReport summarize(const LossMatrix& matrix, const ImportanceQuery& query);

// One grid per layer, cells carrying the importance of that layer's patches;
// undefined cells stay sentinel.
std::vector<Grid> importance_to_map(const ImportanceReport& report,
                                    const std::vector<FeatureCoord>& feature_coords,
                                    const std::vector<LayerRange>& layer_partition);

// Binary container: u64 n, then n*n sums as f64, then n*n counts as u64,
// all little-endian.
void save_loss_matrix(const std::filesystem::path& path, const LossMatrix& matrix);
LossMatrix load_loss_matrix(const std::filesystem::path& path,
                            std::vector<LayerRange> layer_partition);

// CSV: feature_index,layer,patch_row,patch_col,importance ("" if undefined).
void write_importance_csv(const std::filesystem::path& path, const ImportanceReport& report,
                          const std::vector<FeatureCoord>& feature_coords,
                          const std::vector<LayerRange>& layer_partition);

} // namespace mrmae
