#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

namespace mrmae {

struct LayerSpec {
    std::string name;
    std::size_t grid_rows = 0;
    std::size_t grid_cols = 0;
};

struct YearMonth {
    int year = 0;
    int month = 0;

    bool operator==(const YearMonth&) const = default;
    auto operator<=>(const YearMonth&) const = default;
};

std::string timestamp_string(const YearMonth& ym); // "YYYY-MM"

// Describes one gridded multi-layer export: which layers exist, at what grid
// resolution, how large the averaging patches are, and which (year, month)
// observations are expected on disk.
struct LayerManifest {
    std::vector<LayerSpec> layers;
    std::size_t patch_size = 1;
    std::vector<YearMonth> timestamps;
    std::string grid_file_pattern = "{layer}_{year}_{month}.f32";

    void validate() const;
    std::string grid_file_name(const std::string& layer, const YearMonth& ym) const;
    std::size_t layer_index(const std::string& name) const; // throws ConfigError if absent
};

LayerManifest load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, const LayerManifest& manifest);

} // namespace mrmae
