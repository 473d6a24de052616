#include "mrmae/manifest.hpp"

#include <cstdio>
#include <set>

#include <nlohmann/json.hpp>

#include "mrmae/errors.hpp"
#include "mrmae/io_util.hpp"

namespace mrmae {

using json = nlohmann::json;

std::string timestamp_string(const YearMonth& ym) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "%04d-%02d", ym.year, ym.month);
    return buf;
}

void LayerManifest::validate() const {
    if (layers.empty()) throw ConfigError("manifest: at least one layer required");
    if (timestamps.empty()) throw ConfigError("manifest: at least one timestamp required");
    if (patch_size == 0) throw ConfigError("manifest: patch_size must be positive");
    std::set<std::string> names;
    for (const auto& layer : layers) {
        if (layer.name.empty()) throw ConfigError("manifest: empty layer name");
        if (!names.insert(layer.name).second) {
            throw ConfigError("manifest: duplicate layer name '" + layer.name + "'");
        }
        if (layer.grid_rows == 0 || layer.grid_cols == 0) {
            throw ConfigError("manifest: layer '" + layer.name + "' has empty grid");
        }
        if (layer.grid_rows % patch_size != 0 || layer.grid_cols % patch_size != 0) {
            throw ConfigError("manifest: layer '" + layer.name + "' grid " +
                              std::to_string(layer.grid_rows) + "x" + std::to_string(layer.grid_cols) +
                              " not divisible by patch_size " + std::to_string(patch_size));
        }
    }
    for (const auto& ym : timestamps) {
        if (ym.month < 1 || ym.month > 12) {
            throw ConfigError("manifest: month out of range in timestamp " + timestamp_string(ym));
        }
    }
}

std::string LayerManifest::grid_file_name(const std::string& layer, const YearMonth& ym) const {
    std::string out = grid_file_pattern;
    const auto replace = [&out](const std::string& key, const std::string& value) {
        const auto pos = out.find(key);
        if (pos != std::string::npos) out.replace(pos, key.size(), value);
    };
    char year[8], month[8];
    std::snprintf(year, sizeof(year), "%04d", ym.year);
    std::snprintf(month, sizeof(month), "%02d", ym.month);
    replace("{layer}", layer);
    replace("{year}", year);
    replace("{month}", month);
    return out;
}

std::size_t LayerManifest::layer_index(const std::string& name) const {
    for (std::size_t i = 0; i < layers.size(); ++i) {
        if (layers[i].name == name) return i;
    }
    throw ConfigError("unknown layer '" + name + "'");
}

LayerManifest load_manifest(const std::filesystem::path& path) {
    json doc;
    try {
        doc = json::parse(read_file(path));
    } catch (const json::exception& e) {
        throw ConfigError("manifest " + path.string() + ": " + e.what());
    }
    LayerManifest m;
    try {
        for (const auto& layer : doc.at("layers")) {
            m.layers.push_back({layer.at("name").get<std::string>(),
                                layer.at("rows").get<std::size_t>(),
                                layer.at("cols").get<std::size_t>()});
        }
        m.patch_size = doc.at("patch_size").get<std::size_t>();
        for (const auto& ts : doc.at("timestamps")) {
            m.timestamps.push_back({ts.at(0).get<int>(), ts.at(1).get<int>()});
        }
        if (doc.contains("grid_file_pattern")) {
            m.grid_file_pattern = doc.at("grid_file_pattern").get<std::string>();
        }
    } catch (const json::exception& e) {
        throw ConfigError("manifest " + path.string() + ": " + e.what());
    }
    m.validate();
    return m;
}

void save_manifest(const std::filesystem::path& path, const LayerManifest& manifest) {
    manifest.validate();
    json doc;
    doc["layers"] = json::array();
    for (const auto& layer : manifest.layers) {
        doc["layers"].push_back({{"name", layer.name}, {"rows", layer.grid_rows}, {"cols", layer.grid_cols}});
    }
    doc["patch_size"] = manifest.patch_size;
    doc["timestamps"] = json::array();
    for (const auto& ym : manifest.timestamps) {
        doc["timestamps"].push_back({ym.year, ym.month});
    }
    doc["grid_file_pattern"] = manifest.grid_file_pattern;
    atomic_write_file(path, doc.dump(2) + "\n");
}

} // namespace mrmae
