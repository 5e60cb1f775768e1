#pragma once

// Persistence helpers shared by datasets, decoders, checkpoints and run
// configs: a little-endian binary container and a key = value text format.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "crl/types.hpp"

namespace crl::io {

/// Shortest decimal form that parses back to the identical double.
std::string format_double(double v);
double parse_double(std::string_view s);
std::int64_t parse_int(std::string_view s);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view contents);

/// FNV-1a 64-bit.
std::uint64_t fnv1a64(std::string_view bytes);

/// Ordered "key = value" document. `[section]` headers prefix subsequent
/// keys as "section.key". Lines starting with '#' are comments.
class KeyValueDoc {
 public:
  void set(const std::string& key, std::string value);
  void set(const std::string& key, double value) { set(key, format_double(value)); }
  void set(const std::string& key, std::int64_t value) { set(key, std::to_string(value)); }
  void set(const std::string& key, int value) { set(key, std::to_string(value)); }

  bool contains(const std::string& key) const;
  std::optional<std::string> get(const std::string& key) const;
  std::string require(const std::string& key) const;
  double get_double(const std::string& key) const { return parse_double(require(key)); }
  std::int64_t get_int(const std::string& key) const { return parse_int(require(key)); }

  const std::vector<std::pair<std::string, std::string>>& entries() const { return entries_; }

  /// Keys containing a '.' are grouped under their prefix as sections.
  std::string emit() const;
  static KeyValueDoc parse(std::string_view text);

  bool operator==(const KeyValueDoc&) const = default;

 private:
  std::vector<std::pair<std::string, std::string>> entries_;
};

/// Named-array container written as:
///   magic "CRLBIN\0\0", u32 version, u32 entry count,
///   entries (u8 kind, u32 name length, name, payload),
///   u64 FNV-1a checksum of everything before it.
/// Every number is little-endian; matrices are stored row-major f64.
class BinaryArchive {
 public:
  static constexpr std::uint32_t kVersion = 1;

  void put(const std::string& name, Matrix m) { matrices_[name] = std::move(m); }
  void put_ints(const std::string& name, std::vector<std::int64_t> v) { ints_[name] = std::move(v); }
  void put_string(const std::string& name, std::string s) { strings_[name] = std::move(s); }

  const Matrix& matrix(const std::string& name) const;
  const std::vector<std::int64_t>& ints(const std::string& name) const;
  const std::string& string(const std::string& name) const;
  bool has_matrix(const std::string& name) const { return matrices_.count(name) != 0; }

  std::string to_bytes() const;
  static BinaryArchive from_bytes(std::string_view bytes);

  void save(const std::filesystem::path& path) const { write_file(path, to_bytes()); }
  static BinaryArchive load(const std::filesystem::path& path) { return from_bytes(read_file(path)); }

 private:
  std::map<std::string, Matrix> matrices_;
  std::map<std::string, std::vector<std::int64_t>> ints_;
  std::map<std::string, std::string> strings_;
};

}  // namespace crl::io
