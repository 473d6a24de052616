#include "mrmae/grid.hpp"

#include <cmath>
#include <cstdint>
#include <cstring>
#include <limits>

#include "mrmae/errors.hpp"
#include "mrmae/io_util.hpp"

namespace mrmae {

namespace {
constexpr std::uint32_t kMissingBits = 0x7FC00000u;
constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
} // namespace

Grid::Grid(std::size_t r, std::size_t c, double fill) : rows(r), cols(c), values(r * c, fill) {}

Grid make_missing_grid(std::size_t rows, std::size_t cols) {
    return Grid(rows, cols, kNaN);
}

Grid read_grid_f32(const std::filesystem::path& path, std::size_t rows, std::size_t cols) {
    const std::string raw = read_file(path);
    const std::size_t expected = rows * cols * 4;
    if (raw.size() != expected) {
        throw DataError("grid file " + path.string() + ": expected " + std::to_string(expected) +
                        " bytes (" + std::to_string(rows) + "x" + std::to_string(cols) +
                        " f32), got " + std::to_string(raw.size()));
    }
    Grid g(rows, cols, 0.0);
    for (std::size_t i = 0; i < rows * cols; ++i) {
        std::uint32_t bits = 0;
        for (int b = 0; b < 4; ++b) {
            bits |= static_cast<std::uint32_t>(static_cast<unsigned char>(raw[4 * i + b])) << (8 * b);
        }
        float f;
        std::memcpy(&f, &bits, sizeof(f));
        g.values[i] = std::isnan(f) ? kNaN : static_cast<double>(f);
    }
    return g;
}

void write_grid_f32(const std::filesystem::path& path, const Grid& grid) {
    std::string out;
    out.reserve(grid.values.size() * 4);
    for (double v : grid.values) {
        std::uint32_t bits;
        if (std::isnan(v)) {
            bits = kMissingBits;
        } else {
            const float f = static_cast<float>(v);
            std::memcpy(&bits, &f, sizeof(bits));
        }
        for (int b = 0; b < 4; ++b) out.push_back(static_cast<char>((bits >> (8 * b)) & 0xFF));
    }
    atomic_write_file(path, out);
}

Grid patch_average(const Grid& grid, std::size_t patch_size) {
    if (patch_size == 0 || grid.rows % patch_size != 0 || grid.cols % patch_size != 0) {
        throw ConfigError("grid " + std::to_string(grid.rows) + "x" + std::to_string(grid.cols) +
                          " not divisible by patch size " + std::to_string(patch_size));
    }
    const std::size_t pr = grid.rows / patch_size;
    const std::size_t pc = grid.cols / patch_size;
    Grid out(pr, pc, 0.0);
    for (std::size_t r = 0; r < pr; ++r) {
        for (std::size_t c = 0; c < pc; ++c) {
            double sum = 0.0;
            std::size_t count = 0;
            for (std::size_t i = 0; i < patch_size; ++i) {
                for (std::size_t j = 0; j < patch_size; ++j) {
                    const double v = grid.at(r * patch_size + i, c * patch_size + j);
                    if (!std::isnan(v)) {
                        sum += v;
                        ++count;
                    }
                }
            }
            out.at(r, c) = count == 0 ? kNaN : sum / static_cast<double>(count);
        }
    }
    return out;
}

} // namespace mrmae
