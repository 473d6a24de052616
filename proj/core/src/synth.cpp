#include "mrmae/synth.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <map>

#include <nlohmann/json.hpp>

#include "mrmae/errors.hpp"
#include "mrmae/io_util.hpp"
#include "mrmae/rng.hpp"

namespace mrmae {

using json = nlohmann::json;

namespace {

struct FeatureIndexer {
    std::map<std::string, std::pair<std::size_t, const SynthLayer*>> layers; // name -> (begin, layer)
    std::size_t total = 0;

    explicit FeatureIndexer(const SyntheticSpec& spec) {
        std::size_t cursor = 0;
        for (const auto& layer : spec.layers) {
            layers.emplace(layer.name, std::make_pair(cursor, &layer));
            cursor += layer.patch_rows * layer.patch_cols;
        }
        total = cursor;
    }

    std::size_t resolve(const FeatureRef& ref) const {
        const auto it = layers.find(ref.layer);
        if (it == layers.end()) throw ConfigError("synth: unknown layer '" + ref.layer + "'");
        const SynthLayer* layer = it->second.second;
        if (ref.row >= layer->patch_rows || ref.col >= layer->patch_cols) {
            throw ConfigError("synth: patch (" + std::to_string(ref.row) + "," +
                              std::to_string(ref.col) + ") outside layer '" + ref.layer + "'");
        }
        return it->second.first + ref.row * layer->patch_cols + ref.col;
    }
};

FeatureRef parse_ref(const json& doc) {
    return {doc.at("layer").get<std::string>(), doc.at("row").get<std::size_t>(),
            doc.at("col").get<std::size_t>()};
}

json ref_to_json(const FeatureRef& ref) {
    return {{"layer", ref.layer}, {"row", ref.row}, {"col", ref.col}};
}

} // namespace

void SyntheticSpec::validate() const {
    if (k == 0) throw ConfigError("synth: k must be >= 1");
    if (layers.empty()) throw ConfigError("synth: at least one layer required");
    if (start_month < 1 || start_month > 12) throw ConfigError("synth: start_month out of range");
    const FeatureIndexer indexer(*this);

    std::vector<std::vector<std::size_t>> same_time_edges(indexer.total);
    std::vector<int> indegree(indexer.total, 0);
    for (const auto& feature : features) {
        if (feature.noise_sigma < 0.0) throw ConfigError("synth: noise_sigma must be >= 0");
        const std::size_t dst = indexer.resolve(feature.where);
        for (const auto& term : feature.terms) {
            if (term.lag_a == 0) {
                same_time_edges[indexer.resolve(term.a)].push_back(dst);
                ++indegree[dst];
            }
            if (term.kind == SynthTerm::Kind::Product && term.lag_b == 0) {
                same_time_edges[indexer.resolve(term.b)].push_back(dst);
                ++indegree[dst];
            }
        }
    }
    // Kahn's algorithm over the same-time dependency graph.
    std::deque<std::size_t> queue;
    for (std::size_t f = 0; f < indexer.total; ++f) {
        if (indegree[f] == 0) queue.push_back(f);
    }
    std::size_t visited = 0;
    while (!queue.empty()) {
        const std::size_t f = queue.front();
        queue.pop_front();
        ++visited;
        for (std::size_t dst : same_time_edges[f]) {
            if (--indegree[dst] == 0) queue.push_back(dst);
        }
    }
    if (visited != indexer.total) {
        throw ConfigError("synth: same-time dependency graph has a cycle");
    }
}

SyntheticSpec load_synthetic_spec(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("synth spec " + path.string() + ": " + e.what());
    }
    SyntheticSpec spec;
    try {
        spec.seed = doc.value("seed", 0ULL);
        spec.k = doc.at("k").get<std::size_t>();
        spec.patch_size = doc.value("patch_size", std::size_t{1});
        spec.start_year = doc.value("start_year", 2000);
        spec.start_month = doc.value("start_month", 1);
        for (const auto& layer : doc.at("layers")) {
            SynthLayer sl;
            sl.name = layer.at("name").get<std::string>();
            sl.patch_rows = layer.at("patch_rows").get<std::size_t>();
            sl.patch_cols = layer.at("patch_cols").get<std::size_t>();
            sl.drift = layer.value("drift", 0.0);
            if (layer.contains("missing_months")) {
                sl.missing_months = layer["missing_months"].get<std::vector<std::size_t>>();
            }
            spec.layers.push_back(std::move(sl));
        }
        if (doc.contains("features")) {
            for (const auto& feature : doc["features"]) {
                SynthFeature sf;
                sf.where = parse_ref(feature);
                sf.noise_sigma = feature.value("noise_sigma", 1.0);
                if (feature.contains("terms")) {
                    for (const auto& term : feature["terms"]) {
                        SynthTerm st;
                        const auto kind = term.at("kind").get<std::string>();
                        st.coef = term.value("coef", 1.0);
                        if (kind == "linear") {
                            st.kind = SynthTerm::Kind::Linear;
                            st.a = parse_ref(term.at("src"));
                            st.lag_a = term.value("lag", std::size_t{0});
                        } else if (kind == "product") {
                            st.kind = SynthTerm::Kind::Product;
                            st.a = parse_ref(term.at("a"));
                            st.lag_a = term.value("lag_a", std::size_t{0});
                            st.b = parse_ref(term.at("b"));
                            st.lag_b = term.value("lag_b", std::size_t{0});
                        } else {
                            throw ConfigError("synth: unknown term kind '" + kind + "'");
                        }
                        sf.terms.push_back(std::move(st));
                    }
                }
                spec.features.push_back(std::move(sf));
            }
        }
    } catch (const json::exception& e) {
        throw ConfigError("synth spec " + path.string() + ": " + e.what());
    }
    spec.validate();
    return spec;
}

std::vector<YearMonth> month_range(int start_year, int start_month, std::size_t count) {
    std::vector<YearMonth> out;
    out.reserve(count);
    int year = start_year;
    int month = start_month;
    for (std::size_t i = 0; i < count; ++i) {
        out.push_back({year, month});
        if (++month > 12) {
            month = 1;
            ++year;
        }
    }
    return out;
}

SynthData generate_synthetic(const SyntheticSpec& spec) {
    spec.validate();
    const FeatureIndexer indexer(spec);
    const std::size_t n = indexer.total;

    SynthData data;
    data.num_features = n;
    data.manifest.patch_size = spec.patch_size;
    data.manifest.timestamps = month_range(spec.start_year, spec.start_month, spec.k);
    for (const auto& layer : spec.layers) {
        data.manifest.layers.push_back({layer.name, layer.patch_rows * spec.patch_size,
                                        layer.patch_cols * spec.patch_size});
    }

    // Per-feature recipe in index order.
    struct Recipe {
        double noise_sigma = 1.0;
        double drift = 0.0;
        std::vector<std::tuple<SynthTerm::Kind, double, std::size_t, std::size_t, std::size_t,
                               std::size_t>> terms; // kind, coef, a, lag_a, b, lag_b
    };
    std::vector<Recipe> recipes(n);
    {
        std::size_t f = 0;
        for (const auto& layer : spec.layers) {
            for (std::size_t i = 0; i < layer.patch_rows * layer.patch_cols; ++i, ++f) {
                recipes[f].drift = layer.drift;
            }
        }
    }
    for (const auto& feature : spec.features) {
        Recipe& recipe = recipes[indexer.resolve(feature.where)];
        recipe.noise_sigma = feature.noise_sigma;
        for (const auto& term : feature.terms) {
            recipe.terms.emplace_back(term.kind, term.coef, indexer.resolve(term.a), term.lag_a,
                                      term.kind == SynthTerm::Kind::Product ? indexer.resolve(term.b)
                                                                            : 0,
                                      term.lag_b);
        }
    }

    // Topological order of same-time dependencies (validate() proved acyclicity).
    std::vector<std::vector<std::size_t>> edges(n);
    std::vector<int> indegree(n, 0);
    for (std::size_t f = 0; f < n; ++f) {
        for (const auto& [kind, coef, a, lag_a, b, lag_b] : recipes[f].terms) {
            if (lag_a == 0) {
                edges[a].push_back(f);
                ++indegree[f];
            }
            if (kind == SynthTerm::Kind::Product && lag_b == 0) {
                edges[b].push_back(f);
                ++indegree[f];
            }
        }
    }
    std::vector<std::size_t> topo;
    {
        std::deque<std::size_t> queue;
        for (std::size_t f = 0; f < n; ++f) {
            if (indegree[f] == 0) queue.push_back(f);
        }
        while (!queue.empty()) {
            const std::size_t f = queue.front();
            queue.pop_front();
            topo.push_back(f);
            for (std::size_t dst : edges[f]) {
                if (--indegree[dst] == 0) queue.push_back(dst);
            }
        }
    }

    Rng rng(spec.seed);
    data.values.assign(spec.k * n, 0.0);
    std::vector<double> noise(n);
    for (std::size_t t = 0; t < spec.k; ++t) {
        for (std::size_t f = 0; f < n; ++f) {
            noise[f] = recipes[f].noise_sigma > 0.0 ? rng.normal(0.0, recipes[f].noise_sigma) : 0.0;
        }
        const auto lagged = [&](std::size_t f, std::size_t lag) {
            return t >= lag ? data.values[(t - lag) * n + f] : 0.0;
        };
        for (std::size_t f : topo) {
            double v = noise[f] + recipes[f].drift * static_cast<double>(t);
            for (const auto& [kind, coef, a, lag_a, b, lag_b] : recipes[f].terms) {
                if (kind == SynthTerm::Kind::Linear) {
                    v += coef * (lag_a == 0 ? data.values[t * n + a] : lagged(a, lag_a));
                } else {
                    const double va = lag_a == 0 ? data.values[t * n + a] : lagged(a, lag_a);
                    const double vb = lag_b == 0 ? data.values[t * n + b] : lagged(b, lag_b);
                    v += coef * va * vb;
                }
            }
            data.values[t * n + f] = v;
        }
    }
    return data;
}

void write_synthetic_dataset(const SyntheticSpec& spec, const std::filesystem::path& out_dir) {
    const SynthData data = generate_synthetic(spec);
    std::filesystem::create_directories(out_dir);
    save_manifest(out_dir / "manifest.json", data.manifest);

    std::size_t begin = 0;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const auto& layer = spec.layers[li];
        const std::size_t layer_size = layer.patch_rows * layer.patch_cols;
        for (std::size_t t = 0; t < spec.k; ++t) {
            const bool skip = std::find(layer.missing_months.begin(), layer.missing_months.end(),
                                        t) != layer.missing_months.end();
            if (skip) continue;
            Grid grid(layer.patch_rows * spec.patch_size, layer.patch_cols * spec.patch_size, 0.0);
            for (std::size_t r = 0; r < layer.patch_rows; ++r) {
                for (std::size_t c = 0; c < layer.patch_cols; ++c) {
                    const double v = data.values[t * data.num_features + begin + r * layer.patch_cols + c];
                    for (std::size_t i = 0; i < spec.patch_size; ++i) {
                        for (std::size_t j = 0; j < spec.patch_size; ++j) {
                            grid.at(r * spec.patch_size + i, c * spec.patch_size + j) = v;
                        }
                    }
                }
            }
            write_grid_f32(out_dir / data.manifest.grid_file_name(layer.name,
                                                                  data.manifest.timestamps[t]),
                           grid);
        }
        begin += layer_size;
    }

    // Ground-truth dependency graph for oracle tests.
    json truth;
    truth["seed"] = spec.seed;
    truth["k"] = spec.k;
    truth["features"] = json::array();
    for (const auto& feature : spec.features) {
        json f = ref_to_json(feature.where);
        f["noise_sigma"] = feature.noise_sigma;
        f["terms"] = json::array();
        for (const auto& term : feature.terms) {
            json t;
            t["coef"] = term.coef;
            if (term.kind == SynthTerm::Kind::Linear) {
                t["kind"] = "linear";
                t["src"] = ref_to_json(term.a);
                t["lag"] = term.lag_a;
            } else {
                t["kind"] = "product";
                t["a"] = ref_to_json(term.a);
                t["lag_a"] = term.lag_a;
                t["b"] = ref_to_json(term.b);
                t["lag_b"] = term.lag_b;
            }
            f["terms"].push_back(std::move(t));
        }
        truth["features"].push_back(std::move(f));
    }
    json drift = json::object();
    for (const auto& layer : spec.layers) {
        if (layer.drift != 0.0) drift[layer.name] = layer.drift;
    }
    truth["drift"] = drift;
    atomic_write_file(out_dir / "dependency_graph.json", truth.dump(2) + "\n");
}

LayeredDataset dataset_from_matrix(
    const std::vector<std::tuple<std::string, std::size_t, std::size_t>>& layers,
    std::vector<double> values, std::size_t num_observations,
    std::vector<YearMonth> timestamps, std::size_t test_months) {
    LayeredDataset ds;
    std::size_t cursor = 0;
    for (const auto& [name, rows, cols] : layers) {
        LayerRange range;
        range.name = name;
        range.begin = cursor;
        range.end = cursor + rows * cols;
        range.patch_rows = rows;
        range.patch_cols = cols;
        cursor = range.end;
        ds.layer_partition.push_back(range);
    }
    ds.num_features = cursor;
    ds.num_observations = num_observations;
    if (values.size() != num_observations * cursor) {
        throw Error("dataset_from_matrix: value count mismatch");
    }
    ds.data = std::move(values);
    ds.feature_coords.resize(cursor);
    for (std::size_t li = 0; li < ds.layer_partition.size(); ++li) {
        const auto& range = ds.layer_partition[li];
        for (std::size_t r = 0; r < range.patch_rows; ++r) {
            for (std::size_t c = 0; c < range.patch_cols; ++c) {
                ds.feature_coords[range.begin + r * range.patch_cols + c] = {li, r, c};
            }
        }
    }
    if (timestamps.size() != num_observations) {
        throw Error("dataset_from_matrix: timestamp count mismatch");
    }
    ds.timestamps = std::move(timestamps);
    if (test_months >= num_observations) throw Error("dataset_from_matrix: test split too large");
    ds.split.assign(num_observations, Split::Train);
    for (std::size_t i = num_observations - test_months; i < num_observations; ++i) {
        ds.split[i] = Split::Test;
    }
    ds.norm_stats.assign(ds.layer_partition.size(), NormStats{});
    ds.validate_partition();
    return ds;
}

} // namespace mrmae
