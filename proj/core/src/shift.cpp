#include "mrmae/shift.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "mrmae/errors.hpp"
#include "mrmae/evaluate.hpp"
#include "mrmae/log.hpp"
#include "mrmae/masking.hpp"

namespace mrmae {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr double kNegInf = -std::numeric_limits<double>::infinity();
}

YearlyPointCloud build_yearly_points(const LayeredDataset& dataset, const std::string& layer,
                                     std::size_t patch_row, std::size_t patch_col) {
    const std::size_t li = dataset.layer_index(layer);
    const std::size_t j = dataset.feature_index(li, patch_row, patch_col);

    std::map<int, std::vector<double>> by_year; // year -> 12 slots (NaN = absent)
    for (std::size_t i = 0; i < dataset.num_observations; ++i) {
        const YearMonth ym = dataset.timestamps[i];
        auto& slots = by_year.try_emplace(ym.year, std::vector<double>(12, kNaN)).first->second;
        slots[static_cast<std::size_t>(ym.month - 1)] = dataset.value(i, j);
    }

    YearlyPointCloud cloud;
    cloud.layer_name = layer;
    cloud.patch_row = patch_row;
    cloud.patch_col = patch_col;
    for (const auto& [year, slots] : by_year) {
        const bool complete = std::none_of(slots.begin(), slots.end(),
                                           [](double v) { return std::isnan(v); });
        if (!complete) {
            log_debug("dropping incomplete year " + std::to_string(year) + " for " + layer + "(" +
                      std::to_string(patch_row) + "," + std::to_string(patch_col) + ")");
            continue;
        }
        cloud.years.push_back(year);
        cloud.points.push_back(slots);
    }
    if (cloud.points.empty()) {
        throw DataError("no complete year for layer '" + layer + "' patch (" +
                        std::to_string(patch_row) + "," + std::to_string(patch_col) + ")");
    }
    return cloud;
}

EigenDecomposition jacobi_eigen(std::span<const double> matrix, std::size_t dim) {
    if (matrix.size() != dim * dim) throw Error("jacobi_eigen: matrix size mismatch");
    std::vector<double> a(matrix.begin(), matrix.end());
    std::vector<double> v(dim * dim, 0.0);
    for (std::size_t i = 0; i < dim; ++i) v[i * dim + i] = 1.0;

    double norm = 0.0;
    for (double x : a) norm += x * x;
    norm = std::sqrt(norm);
    const double tol = 1e-12 * std::max(1.0, norm);

    constexpr int kMaxSweeps = 100;
    for (int sweep = 0; sweep < kMaxSweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < dim; ++p) {
            for (std::size_t q = p + 1; q < dim; ++q) off += 2.0 * a[p * dim + q] * a[p * dim + q];
        }
        if (std::sqrt(off) <= tol) break;

        for (std::size_t p = 0; p < dim; ++p) {
            for (std::size_t q = p + 1; q < dim; ++q) {
                const double apq = a[p * dim + q];
                if (apq == 0.0) continue;
                const double app = a[p * dim + p];
                const double aqq = a[q * dim + q];
                const double theta = (aqq - app) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;

                for (std::size_t k = 0; k < dim; ++k) {
                    const double akp = a[k * dim + p];
                    const double akq = a[k * dim + q];
                    a[k * dim + p] = c * akp - s * akq;
                    a[k * dim + q] = s * akp + c * akq;
                }
                for (std::size_t k = 0; k < dim; ++k) {
                    const double apk = a[p * dim + k];
                    const double aqk = a[q * dim + k];
                    a[p * dim + k] = c * apk - s * aqk;
                    a[q * dim + k] = s * apk + c * aqk;
                }
                for (std::size_t k = 0; k < dim; ++k) {
                    const double vkp = v[k * dim + p];
                    const double vkq = v[k * dim + q];
                    v[k * dim + p] = c * vkp - s * vkq;
                    v[k * dim + q] = s * vkp + c * vkq;
                }
            }
        }
    }

    std::vector<std::size_t> order(dim);
    for (std::size_t i = 0; i < dim; ++i) order[i] = i;
    std::sort(order.begin(), order.end(),
              [&](std::size_t x, std::size_t y) { return a[x * dim + x] > a[y * dim + y]; });

    EigenDecomposition out;
    out.values.resize(dim);
    out.vectors.assign(dim, std::vector<double>(dim, 0.0));
    for (std::size_t k = 0; k < dim; ++k) {
        const std::size_t col = order[k];
        out.values[k] = a[col * dim + col];
        for (std::size_t r = 0; r < dim; ++r) out.vectors[k][r] = v[r * dim + col];
        // Sign convention: largest-magnitude component positive.
        std::size_t arg = 0;
        for (std::size_t r = 1; r < dim; ++r) {
            if (std::fabs(out.vectors[k][r]) > std::fabs(out.vectors[k][arg])) arg = r;
        }
        if (out.vectors[k][arg] < 0.0) {
            for (double& x : out.vectors[k]) x = -x;
        }
    }
    return out;
}

PcaResult pca_top(const std::vector<std::vector<double>>& points) {
    if (points.size() < 2) throw DataError("pca_top: need at least 2 points");
    const std::size_t dim = points.front().size();
    for (const auto& p : points) {
        if (p.size() != dim) throw DataError("pca_top: inconsistent point dimensions");
    }

    PcaResult result;
    result.mean.assign(dim, 0.0);
    for (const auto& p : points) {
        for (std::size_t d = 0; d < dim; ++d) result.mean[d] += p[d];
    }
    for (double& m : result.mean) m /= static_cast<double>(points.size());

    std::vector<double> cov(dim * dim, 0.0);
    for (const auto& p : points) {
        for (std::size_t r = 0; r < dim; ++r) {
            const double dr = p[r] - result.mean[r];
            for (std::size_t c = r; c < dim; ++c) {
                cov[r * dim + c] += dr * (p[c] - result.mean[c]);
            }
        }
    }
    const double inv = 1.0 / static_cast<double>(points.size()); // population covariance
    for (std::size_t r = 0; r < dim; ++r) {
        for (std::size_t c = r; c < dim; ++c) {
            cov[r * dim + c] *= inv;
            cov[c * dim + r] = cov[r * dim + c];
        }
        result.trace += cov[r * dim + r];
    }

    const EigenDecomposition eig = jacobi_eigen(cov, dim);
    result.lambda1 = eig.values[0];
    result.lambda2 = dim > 1 ? eig.values[1] : 0.0;
    result.component1 = eig.vectors[0];
    result.component2 = dim > 1 ? eig.vectors[1] : std::vector<double>(dim, 0.0);

    result.projections.reserve(points.size());
    for (const auto& p : points) {
        double u = 0.0, w = 0.0;
        for (std::size_t d = 0; d < dim; ++d) {
            const double centered = p[d] - result.mean[d];
            u += centered * result.component1[d];
            w += centered * result.component2[d];
        }
        result.projections.emplace_back(u, w);
    }
    return result;
}

VariabilityMap build_variability_map(const LayeredDataset& dataset, const std::string& layer) {
    const std::size_t li = dataset.layer_index(layer);
    const auto& range = dataset.layer_partition[li];
    VariabilityMap map;
    map.layer_name = layer;
    map.lambda1 = make_missing_grid(range.patch_rows, range.patch_cols);
    for (std::size_t r = 0; r < range.patch_rows; ++r) {
        for (std::size_t c = 0; c < range.patch_cols; ++c) {
            try {
                const YearlyPointCloud cloud = build_yearly_points(dataset, layer, r, c);
                if (cloud.points.size() < 2) continue;
                map.lambda1.at(r, c) = pca_top(cloud.points).lambda1;
            } catch (const DataError&) {
                // stays undefined
            }
        }
    }
    return map;
}

std::vector<std::pair<std::size_t, std::size_t>> select_patches(const Grid& lambda1) {
    const auto value = [&](std::size_t r, std::size_t c) {
        const double v = lambda1.at(r, c);
        return std::isnan(v) ? kNegInf : v;
    };
    std::vector<std::pair<std::size_t, std::size_t>> selected;
    for (std::size_t r = 0; r < lambda1.rows; ++r) {
        for (std::size_t c = 0; c < lambda1.cols; ++c) {
            if (std::isnan(lambda1.at(r, c))) continue;
            const double v = value(r, c);
            bool keep = true;
            for (int dr = -1; dr <= 1 && keep; ++dr) {
                for (int dc = -1; dc <= 1 && keep; ++dc) {
                    if (dr == 0 && dc == 0) continue;
                    const auto nr = static_cast<std::ptrdiff_t>(r) + dr;
                    const auto nc = static_cast<std::ptrdiff_t>(c) + dc;
                    if (nr < 0 || nc < 0 || nr >= static_cast<std::ptrdiff_t>(lambda1.rows) ||
                        nc >= static_cast<std::ptrdiff_t>(lambda1.cols)) {
                        continue;
                    }
                    const double nv = value(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc));
                    if (v < nv) {
                        keep = false;
                    } else if (v == nv) {
                        // tie: lexicographically smaller (row, col) wins
                        if (std::make_pair(static_cast<std::size_t>(nr), static_cast<std::size_t>(nc)) <
                            std::make_pair(r, c)) {
                            keep = false;
                        }
                    }
                }
            }
            if (keep) selected.emplace_back(r, c);
        }
    }
    return selected;
}

Grid combine_variability_max(const std::vector<Grid>& per_layer) {
    if (per_layer.empty()) throw DataError("combine_variability_max: no grids");
    Grid out = make_missing_grid(per_layer.front().rows, per_layer.front().cols);
    for (const auto& g : per_layer) {
        if (g.rows != out.rows || g.cols != out.cols) {
            throw DataError("combine_variability_max: grid shapes differ");
        }
        for (std::size_t i = 0; i < g.values.size(); ++i) {
            const double v = g.values[i];
            if (std::isnan(v)) continue;
            if (std::isnan(out.values[i]) || v > out.values[i]) out.values[i] = v;
        }
    }
    return out;
}

TrendResult accuracy_trend(const MlpModel& model, const LayeredDataset& dataset,
                           const FeatureMeans& means,
                           std::span<const std::size_t> input_features,
                           std::span<const std::size_t> output_features) {
    const auto test = dataset.test_rows();
    if (test.size() < 2) throw DataError("accuracy_trend: need at least 2 test observations");

    const std::size_t n = dataset.num_features;
    std::vector<std::uint32_t> base;
    {
        std::vector<std::uint8_t> is_input(n, 0);
        for (std::size_t j : input_features) is_input[j] = 1;
        for (std::uint32_t j = 0; j < n; ++j) {
            if (!is_input[j]) base.push_back(j);
        }
    }

    TrendResult result;
    std::vector<double> x_filled(n);
    for (std::size_t i : test) {
        const auto x = dataset.row(i);
        std::vector<std::uint32_t> missing;
        for (std::size_t j = 0; j < n; ++j) {
            x_filled[j] = x[j];
            if (std::isnan(x[j])) {
                x_filled[j] = means.means[j];
                missing.push_back(static_cast<std::uint32_t>(j));
            }
        }
        Mask mask = Mask::from_indices(base, n);
        if (!missing.empty()) mask = mask.set_union(Mask{std::move(missing)});
        const std::vector<double> f = apply_mask(x_filled, mask, means);
        const std::vector<double> p = forward(model, f);

        std::vector<std::size_t> scope;
        for (std::size_t j : output_features) {
            if (!std::isnan(x[j])) scope.push_back(j);
        }
        result.accuracies.push_back(accuracy(x_filled, p, scope));
    }

    result.slope = ols_slope(result.accuracies);
    double mean_acc = 0.0;
    for (double a : result.accuracies) mean_acc += a;
    mean_acc /= static_cast<double>(result.accuracies.size());
    const double mean_t = (static_cast<double>(result.accuracies.size()) - 1.0) / 2.0;
    result.intercept = mean_acc - result.slope * mean_t;
    return result;
}

double ols_slope(std::span<const double> series) {
    const std::size_t n = series.size();
    if (n < 2) throw DataError("ols_slope: need at least 2 points");
    const double mean_t = (static_cast<double>(n) - 1.0) / 2.0;
    double mean_y = 0.0;
    for (double y : series) mean_y += y;
    mean_y /= static_cast<double>(n);
    double num = 0.0, den = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double dt = static_cast<double>(t) - mean_t;
        num += dt * (series[t] - mean_y);
        den += dt * dt;
    }
    return num / den;
}

double permutation_pvalue_slope(std::span<const double> series, std::size_t permutations,
                                std::uint64_t seed, SlopeAlternative alternative) {
    const double observed = ols_slope(series);
    std::vector<double> shuffled(series.begin(), series.end());
    Rng rng(seed);
    std::size_t extreme = 0;
    for (std::size_t b = 0; b < permutations; ++b) {
        rng.shuffle(shuffled);
        const double s = ols_slope(shuffled);
        switch (alternative) {
        case SlopeAlternative::Less: extreme += s <= observed; break;
        case SlopeAlternative::Greater: extreme += s >= observed; break;
        case SlopeAlternative::TwoSided: extreme += std::fabs(s) >= std::fabs(observed); break;
        }
    }
    return (1.0 + static_cast<double>(extreme)) / (static_cast<double>(permutations) + 1.0);
}

} // namespace mrmae
