#include "mrmae/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "mrmae/errors.hpp"
#include "mrmae/io_util.hpp"
#include "mrmae/log.hpp"

namespace mrmae {

namespace {
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
}

std::size_t LayeredDataset::feature_index(std::size_t layer, std::size_t patch_row,
                                          std::size_t patch_col) const {
    const LayerRange& range = layer_partition.at(layer);
    return range.begin + patch_row * range.patch_cols + patch_col;
}

const LayerRange& LayeredDataset::layer_of_feature(std::size_t j) const {
    for (const auto& range : layer_partition) {
        if (j >= range.begin && j < range.end) return range;
    }
    throw DataError("feature index " + std::to_string(j) + " outside all layer ranges");
}

std::size_t LayeredDataset::layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layer_partition.size(); ++i) {
        if (layer_partition[i].name == name) return i;
    }
    throw ConfigError("unknown layer '" + name + "'");
}

std::vector<std::size_t> LayeredDataset::train_rows() const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < num_observations; ++i) {
        if (split[i] == Split::Train) rows.push_back(i);
    }
    return rows;
}

std::vector<std::size_t> LayeredDataset::test_rows() const {
    std::vector<std::size_t> rows;
    for (std::size_t i = 0; i < num_observations; ++i) {
        if (split[i] == Split::Test) rows.push_back(i);
    }
    return rows;
}

std::vector<std::size_t> LayeredDataset::missing_in_row(std::size_t i) const {
    std::vector<std::size_t> missing;
    const auto r = row(i);
    for (std::size_t j = 0; j < num_features; ++j) {
        if (std::isnan(r[j])) missing.push_back(j);
    }
    return missing;
}

void LayeredDataset::validate_partition() const {
    std::size_t covered = 0;
    std::size_t cursor = 0;
    for (const auto& range : layer_partition) {
        if (range.begin != cursor || range.end < range.begin) {
            throw DataError("layer partition not contiguous at layer '" + range.name + "'");
        }
        if (range.size() != range.patch_rows * range.patch_cols) {
            throw DataError("layer '" + range.name + "' range size does not match its patch grid");
        }
        covered += range.size();
        cursor = range.end;
    }
    if (covered != num_features) {
        throw DataError("layer partition covers " + std::to_string(covered) + " of " +
                        std::to_string(num_features) + " features");
    }
}

GridStack load_grids(const std::filesystem::path& manifest_path,
                     const std::filesystem::path& grids_dir) {
    GridStack stack;
    stack.manifest = load_manifest(manifest_path);
    const auto& m = stack.manifest;
    stack.grids.resize(m.layers.size());
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        const auto& layer = m.layers[li];
        stack.grids[li].reserve(m.timestamps.size());
        for (const auto& ym : m.timestamps) {
            const auto file = grids_dir / m.grid_file_name(layer.name, ym);
            if (!std::filesystem::exists(file)) {
                log_info("missing grid file " + file.string() + ", treating as fully missing");
                stack.grids[li].push_back(make_missing_grid(layer.grid_rows, layer.grid_cols));
            } else {
                stack.grids[li].push_back(read_grid_f32(file, layer.grid_rows, layer.grid_cols));
            }
        }
    }
    return stack;
}

LayeredDataset build_dataset(const GridStack& stack, std::size_t test_months) {
    const auto& m = stack.manifest;
    m.validate();

    LayeredDataset ds;
    ds.timestamps = m.timestamps;
    ds.num_observations = m.timestamps.size();

    std::size_t n = 0;
    for (const auto& layer : m.layers) {
        LayerRange range;
        range.name = layer.name;
        range.patch_rows = layer.grid_rows / m.patch_size;
        range.patch_cols = layer.grid_cols / m.patch_size;
        range.begin = n;
        range.end = n + range.patch_rows * range.patch_cols;
        n = range.end;
        ds.layer_partition.push_back(range);
    }
    ds.num_features = n;
    ds.feature_coords.resize(n);
    for (std::size_t li = 0; li < ds.layer_partition.size(); ++li) {
        const auto& range = ds.layer_partition[li];
        for (std::size_t r = 0; r < range.patch_rows; ++r) {
            for (std::size_t c = 0; c < range.patch_cols; ++c) {
                ds.feature_coords[range.begin + r * range.patch_cols + c] = {li, r, c};
            }
        }
    }

    ds.data.assign(ds.num_observations * n, kNaN);
    for (std::size_t li = 0; li < m.layers.size(); ++li) {
        const auto& range = ds.layer_partition[li];
        for (std::size_t t = 0; t < ds.num_observations; ++t) {
            const Grid patches = patch_average(stack.grids[li][t], m.patch_size);
            for (std::size_t r = 0; r < range.patch_rows; ++r) {
                for (std::size_t c = 0; c < range.patch_cols; ++c) {
                    ds.data[t * n + range.begin + r * range.patch_cols + c] = patches.at(r, c);
                }
            }
        }
    }

    if (test_months >= ds.num_observations) {
        log_warn("test_months >= number of observations; clamping to leave one training row");
        test_months = ds.num_observations - 1;
    }
    ds.split.assign(ds.num_observations, Split::Train);
    for (std::size_t i = ds.num_observations - test_months; i < ds.num_observations; ++i) {
        ds.split[i] = Split::Test;
    }
    ds.norm_stats.assign(ds.layer_partition.size(), NormStats{});
    ds.validate_partition();
    return ds;
}

LayeredDataset normalize_layers(const LayeredDataset& dataset) {
    const auto train = dataset.train_rows();
    if (train.empty()) throw ConfigError("normalize_layers: empty training split");

    LayeredDataset out = dataset;
    for (std::size_t li = 0; li < dataset.layer_partition.size(); ++li) {
        const auto& range = dataset.layer_partition[li];

        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i : train) {
            for (std::size_t j = range.begin; j < range.end; ++j) {
                const double v = dataset.value(i, j);
                if (!std::isnan(v)) {
                    sum += v;
                    ++count;
                }
            }
        }
        if (count == 0) {
            throw DataError("normalize_layers: layer '" + range.name +
                            "' has no observed training values");
        }
        const double mean = sum / static_cast<double>(count);

        double sq = 0.0;
        for (std::size_t i : train) {
            for (std::size_t j = range.begin; j < range.end; ++j) {
                const double v = dataset.value(i, j);
                if (!std::isnan(v)) {
                    const double d = v - mean;
                    sq += d * d;
                }
            }
        }
        const double std_dev = std::sqrt(sq / static_cast<double>(count));
        if (std_dev < 1e-12) {
            throw DataError("normalize_layers: layer '" + range.name +
                            "' has zero variance on the training split");
        }

        for (std::size_t i = 0; i < dataset.num_observations; ++i) {
            for (std::size_t j = range.begin; j < range.end; ++j) {
                double& v = out.data[i * dataset.num_features + j];
                if (!std::isnan(v)) v = (v - mean) / std_dev;
            }
        }
        out.norm_stats[li] = {mean, std_dev};
    }
    out.normalized = true;
    return out;
}

FeatureMeans compute_feature_means(const LayeredDataset& dataset) {
    const auto train = dataset.train_rows();
    if (train.empty()) throw ConfigError("compute_feature_means: empty training split");

    FeatureMeans fm;
    fm.means.assign(dataset.num_features, 0.0);
    for (std::size_t j = 0; j < dataset.num_features; ++j) {
        double sum = 0.0;
        std::size_t count = 0;
        for (std::size_t i : train) {
            const double v = dataset.value(i, j);
            if (!std::isnan(v)) {
                sum += v;
                ++count;
            }
        }
        fm.means[j] = count == 0 ? 0.0 : sum / static_cast<double>(count);
    }
    return fm;
}

void export_dataset_csv(const std::filesystem::path& path, const LayeredDataset& dataset) {
    std::string out = "timestamp,layer,patch_row,patch_col,value\n";
    for (std::size_t i = 0; i < dataset.num_observations; ++i) {
        const std::string ts = timestamp_string(dataset.timestamps[i]);
        for (std::size_t j = 0; j < dataset.num_features; ++j) {
            const auto& coord = dataset.feature_coords[j];
            const auto& range = dataset.layer_partition[coord.layer];
            const double v = dataset.value(i, j);
            out += ts;
            out += ',';
            out += range.name;
            out += ',';
            out += std::to_string(coord.patch_row);
            out += ',';
            out += std::to_string(coord.patch_col);
            out += ',';
            if (!std::isnan(v)) out += format_double(v);
            out += '\n';
        }
    }
    atomic_write_file(path, out);
}

std::uint64_t norm_stats_hash(const LayeredDataset& dataset) {
    std::string canon;
    for (std::size_t li = 0; li < dataset.layer_partition.size(); ++li) {
        canon += dataset.layer_partition[li].name;
        canon += ':';
        canon += format_double(dataset.norm_stats[li].mean);
        canon += ':';
        canon += format_double(dataset.norm_stats[li].std);
        canon += ';';
    }
    return fnv1a64(canon);
}

} // namespace mrmae
