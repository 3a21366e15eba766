#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace q2t {

// Ordered flat key=value document. Used for manifests and run configs.
// Lines starting with '#' are comments; "[section]" headers prefix the
// following keys with "section.".
class KeyValueFile {
 public:
  using Entry = std::pair<std::string, std::string>;

  static KeyValueFile parse(std::string_view text, std::string_view origin = "<text>");
  static KeyValueFile read(const std::filesystem::path& path);

  void write(const std::filesystem::path& path) const;
  std::string to_string() const;

  // Replaces an existing key in place or appends.
  void set(std::string key, std::string value);
  bool contains(std::string_view key) const;
  std::optional<std::string> find(std::string_view key) const;

  // Throw Error(kParse) when the key is missing or malformed.
  const std::string& at(std::string_view key) const;
  std::int64_t at_int(std::string_view key) const;
  double at_double(std::string_view key) const;

  const std::vector<Entry>& entries() const { return entries_; }

 private:
  std::vector<Entry> entries_;
};

std::int64_t parse_int(std::string_view text, std::string_view what);
double parse_double(std::string_view text, std::string_view what);
bool parse_bool(std::string_view text, std::string_view what);

// Shortest decimal representation that round-trips a double.
std::string format_double(double value);

std::string trim(std::string_view text);
std::vector<std::string> split(std::string_view text, char sep);

}  // namespace q2t
