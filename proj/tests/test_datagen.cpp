#include <doctest.h>

#include <filesystem>

#include "crl/datagen.hpp"

using namespace crl;

namespace {
Dataset small(std::uint64_t seed) {
  Rng rng(seed);
  const auto model = LatentModel::uniform(3);
  const auto g = PolyDecoder::random(3, 2, 12, rng);
  std::vector<InterventionSpec> specs;
  for (int i = 0; i < 3; ++i) specs.push_back(InterventionSpec::do_single(i, 2.0));
  return generate(model, g, specs, {{40, 10, 20}, {30, 6, 9}}, seed);
}
}  // namespace

TEST_CASE("split and source counts") {
  const auto ds = small(1);
  CHECK(ds.rows() == 70 + 45);
  CHECK(ds.select(Split::Train, -1).size() == 40);
  CHECK(ds.select(Split::Test, -1).size() == 20);
  std::size_t interventional = 0;
  for (int i = 0; i < 3; ++i) interventional += ds.select(Split::Train, i).size();
  CHECK(interventional == 30);
  for (auto r : ds.select(Split::Val, 2)) CHECK(ds.z(r, 2) == 2.0);
}

TEST_CASE("x is the decoder applied to z") {
  Rng rng(3);
  const auto g = PolyDecoder::random(2, 3, 9, rng);
  const auto ds = generate(LatentModel::uniform(2), g, {}, {{15, 5, 5}, {}}, 7);
  CHECK(ds.x.isApprox(g.decode(ds.z)));
}

TEST_CASE("generation is deterministic in the seed") {
  CHECK(small(4) == small(4));
  CHECK_FALSE(small(4) == small(5));
}

TEST_CASE("save and load round trip; corrupted files are rejected") {
  const auto dir = std::filesystem::temp_directory_path() / "crl_test_datagen";
  std::filesystem::create_directories(dir);
  const auto path = dir / "d.bin";
  const auto ds = small(2);
  save(ds, path);
  CHECK(load(path) == ds);
  auto bytes = io::read_file(path);
  bytes[bytes.size() / 2] = static_cast<char>(bytes[bytes.size() / 2] ^ 1);
  io::write_file(path, bytes);
  CHECK_THROWS_AS(load(path), FormatError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("neural decoder: injective shapes only, serialization") {
  CHECK_THROWS(NeuralDecoder::random(4, 10, 20, 0));
  const auto g = NeuralDecoder::random(3, 20, 10, 1);
  CHECK(NeuralDecoder::deserialize(g.serialize()) == g);
  Matrix z(2, 3);
  z << 0.1, 0.2, 0.3, 0.1, 0.2, 0.30001;
  const Matrix x = g.decode(z);
  CHECK((x.row(0) - x.row(1)).norm() > 0.0);
}
