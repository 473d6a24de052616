#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace mrmae {

// Doubles are rendered with 17 significant digits so reruns are
// byte-identical and values round-trip exactly.
std::string format_double(double v);

// Writes to <path>.tmp then renames, so readers never observe a partial file.
void atomic_write_file(const std::filesystem::path& path, const std::string& content);

std::string read_file(const std::filesystem::path& path);

// FNV-1a over a byte string; used to fingerprint normalization stats.
std::uint64_t fnv1a64(const std::string& bytes);

// Little-endian scalar IO on a growing byte buffer.
void put_u32(std::string& out, std::uint32_t v);
void put_u64(std::string& out, std::uint64_t v);
void put_f64(std::string& out, double v);

class ByteReader {
public:
    ByteReader(const std::string& data, std::string name);
    std::uint32_t get_u32();
    std::uint64_t get_u64();
    double get_f64();
    bool at_end() const { return pos_ == data_.size(); }
    void expect_end() const;

private:
    void need(std::size_t n) const;
    const std::string& data_;
    std::string name_;
    std::size_t pos_ = 0;
};

} // namespace mrmae
