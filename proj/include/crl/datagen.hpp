#pragma once

// (z, x) dataset assembly with split and intervention labels.

#include <cstdint>
#include <filesystem>
#include <string>
#include <variant>
#include <vector>

#include "crl/io.hpp"
#include "crl/latent_models.hpp"
#include "crl/poly_core.hpp"
#include "crl/types.hpp"

namespace crl {

/// Fixed random leaky-ReLU network d -> h -> h -> n used as a non-polynomial
/// ground-truth decoder. With h >= d, n >= h and full-rank weights every
/// layer is injective, so g is injective.
class NeuralDecoder {
 public:
  NeuralDecoder() = default;
  static NeuralDecoder random(int latent_dim, int obs_dim, int hidden, std::uint64_t seed);

  int latent_dim() const { return static_cast<int>(weights_.front().rows()); }
  Eigen::Index obs_dim() const { return weights_.back().cols(); }
  Matrix decode(const Matrix& z) const;

  std::string serialize() const;
  static NeuralDecoder deserialize(const std::string& text);
  bool operator==(const NeuralDecoder&) const = default;

 private:
  std::vector<Matrix> weights_;  // in x out
  std::vector<RowVector> biases_;
  double slope_ = 0.2;
};

using GroundTruthDecoder = std::variant<PolyDecoder, NeuralDecoder>;

int decoder_latent_dim(const GroundTruthDecoder& g);
Matrix decode(const GroundTruthDecoder& g, const Matrix& z);

enum class Split : std::int8_t { Train = 0, Val = 1, Test = 2 };

struct SplitSizes {
  Eigen::Index train = 10000;
  Eigen::Index val = 2500;
  Eigen::Index test = 20000;
  Eigen::Index total() const { return train + val + test; }
  bool operator==(const SplitSizes&) const = default;
};

struct GenerateSizes {
  SplitSizes observational;
  SplitSizes interventional;
};

struct Dataset {
  Matrix x;
  Matrix z;
  std::vector<Split> split;
  std::vector<int> target;       // -1 for observational rows
  std::vector<int> value_index;  // -1 for observational rows
  std::vector<InterventionSpec> specs;
  io::KeyValueDoc provenance;

  Eigen::Index rows() const { return x.rows(); }

  /// Row indices in `s`; `target` = -1 selects observational rows, -2 any
  /// source, otherwise rows intervened on that target.
  std::vector<Eigen::Index> select(Split s, int target = -2) const;
  std::vector<Eigen::Index> select_value(Split s, int target, int value) const;
  Matrix rows_x(const std::vector<Eigen::Index>& idx) const { return x(idx, Eigen::all); }
  Matrix rows_z(const std::vector<Eigen::Index>& idx) const { return z(idx, Eigen::all); }

  bool operator==(const Dataset& o) const;
};

/// Observational rows come first (train, val, test), then interventional
/// rows (train, val, test). Each interventional row picks one spec uniformly;
/// x = g(z) with no observation noise.
Dataset generate(const LatentModel& model, const GroundTruthDecoder& decoder,
                 const std::vector<InterventionSpec>& specs, const GenerateSizes& sizes,
                 std::uint64_t seed);

/// Binary container at `path` and a "<path>.meta" provenance sidecar.
void save(const Dataset& ds, const std::filesystem::path& path);
Dataset load(const std::filesystem::path& path);

}  // namespace crl
