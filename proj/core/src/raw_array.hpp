#pragma once

#include <filesystem>
#include <span>
#include <vector>

#include "q2t/checksum.hpp"

namespace q2t::detail {

// Little-endian float32 bytes of `values`.
std::vector<std::byte> f32_bytes(std::span<const double> values);

// Writes `values` as raw little-endian float32 and feeds the bytes to `hasher`.
void write_f32(std::span<const double> values, const std::filesystem::path& path, Sha256& hasher);

// Reads exactly `count` float32 values; kShape when the file size disagrees.
std::vector<double> read_f32(const std::filesystem::path& path, std::size_t count, Sha256& hasher);

}  // namespace q2t::detail
