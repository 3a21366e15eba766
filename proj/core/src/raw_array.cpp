#include "raw_array.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>

#include <fmt/format.h>

#include "q2t/error.hpp"

namespace q2t::detail {

namespace {

std::uint32_t to_little(std::uint32_t bits) {
  if constexpr (std::endian::native == std::endian::big) return __builtin_bswap32(bits);
  return bits;
}

}  // namespace

std::vector<std::byte> f32_bytes(std::span<const double> values) {
  std::vector<std::byte> bytes(values.size() * sizeof(float));
  for (std::size_t i = 0; i < values.size(); ++i) {
    const auto bits = to_little(std::bit_cast<std::uint32_t>(static_cast<float>(values[i])));
    std::memcpy(bytes.data() + i * sizeof(float), &bits, sizeof(float));
  }
  return bytes;
}

void write_f32(std::span<const double> values, const std::filesystem::path& path, Sha256& hasher) {
  const auto bytes = f32_bytes(values);
  hasher.update(bytes);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::kIo, fmt::format("cannot write '{}'", path.string()));
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw Error(ErrorKind::kIo, fmt::format("short write to '{}'", path.string()));
}

std::vector<double> read_f32(const std::filesystem::path& path, std::size_t count, Sha256& hasher) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::kIo, fmt::format("cannot open '{}'", path.string()));
  const auto expected_bytes = count * sizeof(float);
  const auto actual = std::filesystem::file_size(path);
  if (actual != expected_bytes) {
    throw Error(ErrorKind::kShape, fmt::format("'{}' holds {} bytes, manifest implies {}",
                                               path.string(), actual, expected_bytes));
  }
  std::vector<std::byte> bytes(expected_bytes);
  in.read(reinterpret_cast<char*>(bytes.data()), static_cast<std::streamsize>(expected_bytes));
  hasher.update(bytes);
  std::vector<double> values(count);
  for (std::size_t i = 0; i < count; ++i) {
    std::uint32_t bits = 0;
    std::memcpy(&bits, bytes.data() + i * sizeof(float), sizeof(float));
    values[i] = std::bit_cast<float>(to_little(bits));
  }
  return values;
}

}  // namespace q2t::detail
