#pragma once

#include <cstddef>
#include <filesystem>
#include <vector>

namespace mrmae {

// Dense row-major grid of real values. Missing cells are NaN in memory and
// the quiet-NaN bit pattern 0x7FC00000 in .f32 files.
struct Grid {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> values; // rows*cols, row-major

    Grid() = default;
    Grid(std::size_t r, std::size_t c, double fill);

    double& at(std::size_t r, std::size_t c) { return values[r * cols + c]; }
    double at(std::size_t r, std::size_t c) const { return values[r * cols + c]; }
};

Grid make_missing_grid(std::size_t rows, std::size_t cols);

// Raw little-endian 32-bit floats, row-major, exactly rows*cols values.
// Any NaN payload reads back as missing; missing writes as 0x7FC00000.
Grid read_grid_f32(const std::filesystem::path& path, std::size_t rows, std::size_t cols);
void write_grid_f32(const std::filesystem::path& path, const Grid& grid);

// Mean of each patch_size x patch_size block; missing cells are skipped and
// an all-missing block stays missing. Dimensions must divide evenly.
Grid patch_average(const Grid& grid, std::size_t patch_size);

} // namespace mrmae
