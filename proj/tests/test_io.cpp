#include <doctest.h>

#include <filesystem>

#include "crl/io.hpp"

using namespace crl;

TEST_CASE("format_double round trips") {
  for (double v : {0.1, -1e-300, 1.0 / 3.0, 6.02214076e23, 0.0, -2.5}) CHECK(io::parse_double(io::format_double(v)) == v);
}

TEST_CASE("key value doc: sections and comments") {
  io::KeyValueDoc doc;
  doc.set("profile", std::string("desk"));
  doc.set("data.d", 6);
  doc.set("data.latent", std::string("uniform"));
  doc.set("ios.lambda", 10.0);
  const auto text = doc.emit();
  CHECK(text.find("[data]") != std::string::npos);
  const auto back = io::KeyValueDoc::parse("# header\n" + text);
  CHECK(back == doc);
  CHECK(back.get_int("data.d") == 6);
  CHECK_THROWS(back.require("missing"));
}

TEST_CASE("binary archive: round trip and corruption") {
  io::BinaryArchive ar;
  Matrix m(2, 3);
  m << 1, 2, 3, 4, 5, 6.5;
  ar.put("m", m);
  ar.put_ints("ix", {-1, 0, 7});
  ar.put_string("s", "hello");
  auto bytes = ar.to_bytes();
  const auto back = io::BinaryArchive::from_bytes(bytes);
  CHECK(back.matrix("m") == m);
  CHECK(back.ints("ix") == std::vector<std::int64_t>{-1, 0, 7});
  CHECK(back.string("s") == "hello");

  auto flipped = bytes;
  flipped[20] = static_cast<char>(flipped[20] ^ 0x40);
  CHECK_THROWS_AS(io::BinaryArchive::from_bytes(flipped), FormatError);
  CHECK_THROWS_AS(io::BinaryArchive::from_bytes(bytes.substr(0, bytes.size() - 3)), FormatError);
  CHECK_THROWS_AS(io::BinaryArchive::from_bytes("not an archive"), FormatError);
}

TEST_CASE("fnv1a64 reference values") {
  CHECK(io::fnv1a64("") == 0xcbf29ce484222325ULL);
  CHECK(io::fnv1a64("a") == 0xaf63dc4c8601ec8cULL);
}
