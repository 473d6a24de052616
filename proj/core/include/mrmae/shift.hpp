#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "mrmae/dataset.hpp"
#include "mrmae/nnet.hpp"
#include "mrmae/rng.hpp"

namespace mrmae {

struct YearlyPointCloud {
    std::string layer_name;
    std::size_t patch_row = 0;
    std::size_t patch_col = 0;
    std::vector<int> years;                 // strictly increasing
    std::vector<std::vector<double>> points; // one 12-vector per complete year
};

// Gathers one 12-dimensional point per complete calendar year for a patch;
// years with a missing month (or missing value) are dropped and logged.
// Throws DataError when no complete year remains.
YearlyPointCloud build_yearly_points(const LayeredDataset& dataset, const std::string& layer,
                                     std::size_t patch_row, std::size_t patch_col);

struct EigenDecomposition {
    std::vector<double> values;               // descending
    std::vector<std::vector<double>> vectors; // vectors[k] belongs to values[k]
};

// Cyclic Jacobi on a dense symmetric matrix (row-major, dim x dim). Sweeps
// until the off-diagonal Frobenius norm falls below 1e-12 relative to the
// matrix norm. Eigenvector signs: the largest-magnitude entry is positive.
EigenDecomposition jacobi_eigen(std::span<const double> matrix, std::size_t dim);

struct PcaResult {
    double lambda1 = 0.0;
    double lambda2 = 0.0;
    std::vector<double> component1; // unit, sign-fixed
    std::vector<double> component2;
    std::vector<std::pair<double, double>> projections; // per point (u, v)
    std::vector<double> mean;
    double trace = 0.0; // of the covariance
};

// Mean-center, population covariance, top two eigenpairs. Needs >= 2 points.
PcaResult pca_top(const std::vector<std::vector<double>>& points);

struct VariabilityMap {
    std::string layer_name;
    Grid lambda1;                                            // NaN where undefined
    std::vector<std::pair<std::size_t, std::size_t>> selected;
};

// lambda1 per patch of one layer; patches without two complete years stay
// undefined. Does not run selection; call select_patches on .lambda1.
VariabilityMap build_variability_map(const LayeredDataset& dataset, const std::string& layer);

// Keeps a patch iff its value strictly exceeds every 8-neighbor, ties broken
// in favor of the lexicographically smaller (row, col). Undefined cells are
// -inf: they never win and never block a neighbor.
std::vector<std::pair<std::size_t, std::size_t>> select_patches(const Grid& lambda1);

// Cell-wise max over per-layer variability grids (all same shape).
Grid combine_variability_max(const std::vector<Grid>& per_layer);

struct TrendResult {
    std::vector<double> accuracies; // chronological over the test rows
    double slope = 0.0;             // OLS over the 0-based time index
    double intercept = 0.0;
};

// Per-observation task accuracy over chronologically ordered test rows:
// inputs visible, outputs imputed with the training means, single forward
// pass, accuracy on the output features.
TrendResult accuracy_trend(const MlpModel& model, const LayeredDataset& dataset,
                           const FeatureMeans& means,
                           std::span<const std::size_t> input_features,
                           std::span<const std::size_t> output_features);

double ols_slope(std::span<const double> series);

enum class SlopeAlternative { Less, Greater, TwoSided };

// Permutation test on the OLS slope: shuffles the series against the time
// index. Returns (1 + #extreme) / (permutations + 1).
double permutation_pvalue_slope(std::span<const double> series, std::size_t permutations,
                                std::uint64_t seed, SlopeAlternative alternative);

} // namespace mrmae
