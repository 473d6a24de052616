#include "mrmae/importance.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrmae/errors.hpp"
#include "mrmae/io_util.hpp"

namespace mrmae {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

LossMatrix LossMatrix::zeros(std::size_t n, std::vector<LayerRange> partition) {
    LossMatrix m;
    m.n = n;
    m.sums.assign(n * n, 0.0);
    m.counts.assign(n * n, 0);
    m.layer_partition = std::move(partition);
    return m;
}

double LossMatrix::average(std::size_t a, std::size_t b) const {
    if (!defined(a, b)) {
        throw DataError("loss matrix cell (" + std::to_string(a) + "," + std::to_string(b) +
                        ") has no samples");
    }
    return sum_at(a, b) / static_cast<double>(count_at(a, b));
}

void LossMatrix::merge(const LossMatrix& other) {
    if (other.n != n) throw Error("loss matrix merge: size mismatch");
    for (std::size_t i = 0; i < sums.size(); ++i) {
        sums[i] += other.sums[i];
        counts[i] += other.counts[i];
    }
}

LossMatrix accumulate_loss_matrix(const MlpModel& model, const LayeredDataset& dataset,
                                  const FeatureMeans& means, const LossMatrixConfig& cfg) {
    const std::size_t n = dataset.num_features;
    LossMatrix matrix = LossMatrix::zeros(n, dataset.layer_partition);

    std::vector<std::size_t> rows;
    switch (cfg.scope) {
    case ObservationScope::Train: rows = dataset.train_rows(); break;
    case ObservationScope::Test: rows = dataset.test_rows(); break;
    case ObservationScope::All:
        rows.resize(dataset.num_observations);
        for (std::size_t i = 0; i < rows.size(); ++i) rows[i] = i;
        break;
    }

    Rng rng(cfg.seed);
    ForwardCache cache;
    std::vector<double> x_filled(n);
    std::vector<std::uint32_t> visible;
    visible.reserve(n);

    for (std::size_t pass = 0; pass < cfg.iterations; ++pass) {
        for (std::size_t i : rows) {
            const auto x = dataset.row(i);
            std::vector<std::uint32_t> missing;
            for (std::size_t j = 0; j < n; ++j) {
                x_filled[j] = x[j];
                if (std::isnan(x[j])) {
                    x_filled[j] = means.means[j];
                    missing.push_back(static_cast<std::uint32_t>(j));
                }
            }
            Mask mask = sample_mask(cfg.policy, n, dataset.layer_partition, rng);
            if (!missing.empty()) mask = mask.set_union(Mask{std::move(missing)});

            const std::vector<double> f = apply_mask(x_filled, mask, means);
            const auto& p = forward_cached(model, f, cache);

            visible.clear();
            for (std::uint32_t j = 0; j < n; ++j) {
                if (!mask.contains(j)) visible.push_back(j);
            }
            for (std::uint32_t b : mask.members) {
                if (std::isnan(x[b])) continue; // masked because missing: no ground truth
                const double diff = p[b] - x_filled[b];
                const double lb = cfg.loss == LossBase::L1 ? std::fabs(diff) : diff * diff;
                for (std::uint32_t a : visible) {
                    matrix.sums[a * n + b] += lb;
                    matrix.counts[a * n + b] += 1;
                }
            }
        }
    }
    return matrix;
}

namespace {

// Negate and min-max normalize the defined entries; one defined point maps
// to 0 (no information about relative importance).
void finalize_report(ImportanceReport& report) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -std::numeric_limits<double>::infinity();
    std::size_t defined_count = 0;
    for (std::size_t j = 0; j < report.raw_average.size(); ++j) {
        if (!report.defined[j]) continue;
        const double neg = -report.raw_average[j];
        lo = std::min(lo, neg);
        hi = std::max(hi, neg);
        ++defined_count;
    }
    report.importance.assign(report.raw_average.size(), kNaN);
    if (defined_count == 0) return;
    const double span = hi - lo;
    for (std::size_t j = 0; j < report.raw_average.size(); ++j) {
        if (!report.defined[j]) continue;
        if (defined_count == 1 || span <= 0.0) {
            report.importance[j] = 0.0;
        } else {
            report.importance[j] = (-report.raw_average[j] - lo) / span;
        }
    }
}

} // namespace

ImportanceReport summarize(const LossMatrix& matrix, const ImportanceQuery& query) {
    const std::size_t n = matrix.n;
    ImportanceReport report;
    report.query = query;
    report.raw_average.assign(n, kNaN);
    report.defined.assign(n, 0);

    std::size_t col_begin = 0, col_end = 0;
    switch (query.mode) {
    case ImportanceMode::Feature:
        if (query.target_feature >= n) throw ConfigError("importance: target feature out of range");
        col_begin = query.target_feature;
        col_end = query.target_feature + 1;
        break;
    case ImportanceMode::Layer: {
        const auto it = std::find_if(matrix.layer_partition.begin(), matrix.layer_partition.end(),
                                     [&](const LayerRange& r) { return r.name == query.target_layer; });
        if (it == matrix.layer_partition.end()) {
            throw ConfigError("importance: unknown layer '" + query.target_layer + "'");
        }
        col_begin = it->begin;
        col_end = it->end;
        break;
    }
    case ImportanceMode::Global:
        col_begin = 0;
        col_end = n;
        break;
    }

    bool any_defined = false;
    for (std::size_t a = 0; a < n; ++a) {
        double sum = 0.0;
        std::size_t cells = 0;
        for (std::size_t b = col_begin; b < col_end; ++b) {
            if (matrix.defined(a, b)) {
                sum += matrix.average(a, b);
                ++cells;
            }
        }
        if (cells > 0) {
            report.raw_average[a] = sum / static_cast<double>(cells);
            report.defined[a] = 1;
            any_defined = true;
        }
    }
    if (!any_defined) {
        throw DataError("importance: target was never masked under this policy (no defined cells)");
    }
    finalize_report(report);
    return report;
}

std::vector<Grid> importance_to_map(const ImportanceReport& report,
                                    const std::vector<FeatureCoord>& feature_coords,
                                    const std::vector<LayerRange>& layer_partition) {
    std::vector<Grid> maps;
    maps.reserve(layer_partition.size());
    for (const auto& range : layer_partition) {
        maps.push_back(make_missing_grid(range.patch_rows, range.patch_cols));
    }
    for (std::size_t j = 0; j < report.importance.size(); ++j) {
        if (!report.defined[j]) continue;
        const auto& coord = feature_coords[j];
        maps[coord.layer].at(coord.patch_row, coord.patch_col) = report.importance[j];
    }
    return maps;
}

void save_loss_matrix(const std::filesystem::path& path, const LossMatrix& matrix) {
    std::string out;
    out.reserve(8 + matrix.sums.size() * 16);
    put_u64(out, matrix.n);
    for (double s : matrix.sums) put_f64(out, s);
    for (std::uint64_t c : matrix.counts) put_u64(out, c);
    atomic_write_file(path, out);
}

LossMatrix load_loss_matrix(const std::filesystem::path& path,
                            std::vector<LayerRange> layer_partition) {
    const std::string raw = read_file(path);
    ByteReader reader(raw, path.string());
    const std::uint64_t n = reader.get_u64();
    LossMatrix matrix = LossMatrix::zeros(n, std::move(layer_partition));
    for (double& s : matrix.sums) s = reader.get_f64();
    for (std::uint64_t& c : matrix.counts) c = reader.get_u64();
    reader.expect_end();
    return matrix;
}

void write_importance_csv(const std::filesystem::path& path, const ImportanceReport& report,
                          const std::vector<FeatureCoord>& feature_coords,
                          const std::vector<LayerRange>& layer_partition) {
    std::string out = "feature_index,layer,patch_row,patch_col,importance\n";
    for (std::size_t j = 0; j < report.importance.size(); ++j) {
        const auto& coord = feature_coords[j];
        out += std::to_string(j);
        out += ',';
        out += layer_partition[coord.layer].name;
        out += ',';
        out += std::to_string(coord.patch_row);
        out += ',';
        out += std::to_string(coord.patch_col);
        out += ',';
        if (report.defined[j]) out += format_double(report.importance[j]);
        out += '\n';
    }
    atomic_write_file(path, out);
}

} // namespace mrmae
