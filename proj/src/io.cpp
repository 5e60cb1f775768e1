#include "crl/io.hpp"

#include <array>
#include <bit>
#include <charconv>
#include <cstring>
#include <fstream>
#include <sstream>

namespace crl::io {

std::string format_double(double v) {
  std::array<char, 64> buf{};
  auto res = std::to_chars(buf.data(), buf.data() + buf.size(), v);
  return std::string(buf.data(), res.ptr);
}

namespace {

std::string_view trim(std::string_view s) {
  const auto first = s.find_first_not_of(" \t\r\n");
  if (first == std::string_view::npos) return {};
  const auto last = s.find_last_not_of(" \t\r\n");
  return s.substr(first, last - first + 1);
}

}  // namespace

double parse_double(std::string_view s) {
  s = trim(s);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError("not a number: '" + std::string(s) + "'");
  return v;
}

std::int64_t parse_int(std::string_view s) {
  s = trim(s);
  std::int64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size())
    throw FormatError("not an integer: '" + std::string(s) + "'");
  return v;
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw FormatError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view contents) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
}

std::uint64_t fnv1a64(std::string_view bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// ---------------------------------------------------------------- KeyValueDoc

void KeyValueDoc::set(const std::string& key, std::string value) {
  for (auto& [k, v] : entries_) {
    if (k == key) {
      v = std::move(value);
      return;
    }
  }
  entries_.emplace_back(key, std::move(value));
}

bool KeyValueDoc::contains(const std::string& key) const { return get(key).has_value(); }

std::optional<std::string> KeyValueDoc::get(const std::string& key) const {
  for (const auto& [k, v] : entries_)
    if (k == key) return v;
  return std::nullopt;
}

std::string KeyValueDoc::require(const std::string& key) const {
  auto v = get(key);
  if (!v) throw FormatError("missing key '" + key + "'");
  return *v;
}

std::string KeyValueDoc::emit() const {
  std::ostringstream out;
  std::string section;
  for (const auto& [k, v] : entries_) {
    const auto dot = k.find('.');
    const std::string sec = dot == std::string::npos ? std::string() : k.substr(0, dot);
    const std::string name = dot == std::string::npos ? k : k.substr(dot + 1);
    if (sec != section) {
      if (sec.empty())
        throw std::logic_error("KeyValueDoc: unsectioned key '" + k + "' after a section");
      out << "\n[" << sec << "]\n";
      section = sec;
    }
    out << name << " = " << v << "\n";
  }
  return out.str();
}

KeyValueDoc KeyValueDoc::parse(std::string_view text) {
  KeyValueDoc doc;
  std::string section;
  std::size_t pos = 0;
  int line_no = 0;
  while (pos <= text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    auto line = trim(text.substr(pos, end - pos));
    ++line_no;
    pos = end + 1;
    if (line.empty() || line.front() == '#') {
      if (end == text.size()) break;
      continue;
    }
    if (line.front() == '[') {
      if (line.back() != ']') throw FormatError("bad section header on line " + std::to_string(line_no));
      section = std::string(trim(line.substr(1, line.size() - 2)));
    } else {
      const auto eq = line.find('=');
      if (eq == std::string_view::npos)
        throw FormatError("expected 'key = value' on line " + std::to_string(line_no));
      std::string key(trim(line.substr(0, eq)));
      if (!section.empty()) key = section + "." + key;
      doc.set(key, std::string(trim(line.substr(eq + 1))));
    }
    if (end == text.size()) break;
  }
  return doc;
}

// -------------------------------------------------------------- BinaryArchive

namespace {

constexpr std::array<char, 8> kMagic = {'C', 'R', 'L', 'B', 'I', 'N', '\0', '\0'};
enum class Kind : std::uint8_t { Matrix = 1, Ints = 2, String = 3 };

template <typename T>
void put_le(std::string& out, T value) {
  using U = std::make_unsigned_t<T>;
  auto u = static_cast<U>(value);
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<char>((u >> (8 * i)) & 0xFF));
}

void put_f64(std::string& out, double v) { put_le(out, std::bit_cast<std::uint64_t>(v)); }

class Cursor {
 public:
  explicit Cursor(std::string_view bytes) : bytes_(bytes) {}

  template <typename T>
  T get() {
    using U = std::make_unsigned_t<T>;
    need(sizeof(U));
    U u = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i)
      u |= static_cast<U>(static_cast<unsigned char>(bytes_[pos_ + i])) << (8 * i);
    pos_ += sizeof(U);
    return static_cast<T>(u);
  }
  double get_f64() { return std::bit_cast<double>(get<std::uint64_t>()); }
  std::string_view take(std::size_t n) {
    need(n);
    auto s = bytes_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t pos() const { return pos_; }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > bytes_.size()) throw FormatError("binary archive truncated");
  }
  std::string_view bytes_;
  std::size_t pos_ = 0;
};

void put_name(std::string& out, Kind kind, const std::string& name) {
  out.push_back(static_cast<char>(kind));
  put_le(out, static_cast<std::uint32_t>(name.size()));
  out += name;
}

}  // namespace

const Matrix& BinaryArchive::matrix(const std::string& name) const {
  auto it = matrices_.find(name);
  if (it == matrices_.end()) throw FormatError("archive has no matrix '" + name + "'");
  return it->second;
}

const std::vector<std::int64_t>& BinaryArchive::ints(const std::string& name) const {
  auto it = ints_.find(name);
  if (it == ints_.end()) throw FormatError("archive has no integer array '" + name + "'");
  return it->second;
}

const std::string& BinaryArchive::string(const std::string& name) const {
  auto it = strings_.find(name);
  if (it == strings_.end()) throw FormatError("archive has no string '" + name + "'");
  return it->second;
}

std::string BinaryArchive::to_bytes() const {
  std::string out(kMagic.begin(), kMagic.end());
  put_le(out, kVersion);
  put_le(out, static_cast<std::uint32_t>(matrices_.size() + ints_.size() + strings_.size()));
  for (const auto& [name, m] : matrices_) {
    put_name(out, Kind::Matrix, name);
    put_le(out, static_cast<std::uint64_t>(m.rows()));
    put_le(out, static_cast<std::uint64_t>(m.cols()));
    for (Eigen::Index r = 0; r < m.rows(); ++r)
      for (Eigen::Index c = 0; c < m.cols(); ++c) put_f64(out, m(r, c));
  }
  for (const auto& [name, v] : ints_) {
    put_name(out, Kind::Ints, name);
    put_le(out, static_cast<std::uint64_t>(v.size()));
    for (auto x : v) put_le(out, x);
  }
  for (const auto& [name, s] : strings_) {
    put_name(out, Kind::String, name);
    put_le(out, static_cast<std::uint64_t>(s.size()));
    out += s;
  }
  put_le(out, fnv1a64(out));
  return out;
}

BinaryArchive BinaryArchive::from_bytes(std::string_view bytes) {
  if (bytes.size() < kMagic.size() + 8 ||
      std::memcmp(bytes.data(), kMagic.data(), kMagic.size()) != 0)
    throw FormatError("not a crl binary archive (bad magic)");
  Cursor cur(bytes);
  cur.take(kMagic.size());
  const auto version = cur.get<std::uint32_t>();
  if (version != kVersion)
    throw FormatError("unsupported archive version " + std::to_string(version));
  const auto count = cur.get<std::uint32_t>();
  BinaryArchive ar;
  for (std::uint32_t e = 0; e < count; ++e) {
    const auto kind = static_cast<Kind>(cur.get<std::uint8_t>());
    const auto name_len = cur.get<std::uint32_t>();
    std::string name(cur.take(name_len));
    switch (kind) {
      case Kind::Matrix: {
        const auto rows = cur.get<std::uint64_t>();
        const auto cols = cur.get<std::uint64_t>();
        if (rows * cols * 8 > bytes.size()) throw FormatError("binary archive truncated");
        Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
        for (Eigen::Index r = 0; r < m.rows(); ++r)
          for (Eigen::Index c = 0; c < m.cols(); ++c) m(r, c) = cur.get_f64();
        ar.matrices_[name] = std::move(m);
        break;
      }
      case Kind::Ints: {
        const auto n = cur.get<std::uint64_t>();
        if (n * 8 > bytes.size()) throw FormatError("binary archive truncated");
        std::vector<std::int64_t> v(n);
        for (auto& x : v) x = cur.get<std::int64_t>();
        ar.ints_[name] = std::move(v);
        break;
      }
      case Kind::String: {
        const auto n = cur.get<std::uint64_t>();
        ar.strings_[name] = std::string(cur.take(n));
        break;
      }
      default:
        throw FormatError("unknown entry kind in archive");
    }
  }
  const auto body_end = cur.pos();
  const auto stored = cur.get<std::uint64_t>();
  if (stored != fnv1a64(bytes.substr(0, body_end))) throw FormatError("archive checksum mismatch");
  if (cur.pos() != bytes.size()) throw FormatError("trailing bytes after archive");
  return ar;
}

}  // namespace crl::io
