#pragma once

// Latent distributions P_Z and their interventional variants.

#include <cstdint>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "crl/types.hpp"

namespace crl {

enum class NoiseKind { Gaussian, Uniform };

// Additive: z_j = w . pa + eps. Bounded: z_j = sqrt(3) s_j (2 u^exp(c tanh(w . pa)) - 1)
// with u ~ Uniform(0, 1), so the parents move the density but never the
// support, and the joint support is a box.
enum class Mechanism { Additive, Bounded };

/// Linear DAG over latents in topological index order: weights(i, j) is the
/// weight of edge i -> j and is only nonzero for i < j.
struct ScmGraph {
  int d = 0;
  Matrix weights;
  Vector noise_std;
  NoiseKind noise = NoiseKind::Gaussian;
  Mechanism mechanism = Mechanism::Additive;
  double bounded_strength = 1.0;  // c above

  bool has_edge(int from, int to) const { return weights(from, to) != 0.0; }
  std::vector<int> parents(int node) const;
  int edge_count() const;

  /// 0 -> 1 -> ... -> d-1 with the given weight on every edge.
  static ScmGraph chain(int d, double weight, NoiseKind noise = NoiseKind::Gaussian);

  /// Edge list text ("from to weight" per line) plus header keys.
  std::string serialize() const;
  static ScmGraph deserialize(const std::string& text);

  bool operator==(const ScmGraph&) const = default;
};

/// Erdos-Renyi DAG with `density` expected edges per node. Each of the
/// d(d-1)/2 forward edges is present with probability 2 * density / (d - 1);
/// weights are uniform on +-[0.5, 1.5]; noise is standard normal.
ScmGraph sample_scm_graph(int d, double density, std::uint64_t seed);

/// Nodes with a directed path into `node`.
std::set<int> ancestors(const ScmGraph& graph, int node);

enum class LatentKind { Uniform, UniformCorrelated, GaussianMixture, ScmLinear };

struct LatentModel {
  LatentKind kind = LatentKind::Uniform;
  int d = 0;

  // Uniform
  double low = -5.0;
  double high = 5.0;

  // UniformCorrelated: pairs (z_i, z_i+1) driven by c1 ~ B(p1), c2 ~ B(p2).
  double confounder_p1 = 0.5;
  double confounder_p2 = 0.9;
  double first_half_width = 0.5;
  double second_half_width = 0.3;

  // GaussianMixture: equal-weight components N(mean_k, std_k^2).
  double mixture_mean[2] = {0.0, 1.0};
  double mixture_std[2] = {1.0, 1.4142135623730951};

  std::optional<ScmGraph> graph;

  static LatentModel uniform(int d, double low = -5.0, double high = 5.0);
  static LatentModel uniform_correlated(int d);
  static LatentModel gaussian_mixture(int d);
  static LatentModel scm(ScmGraph graph);

  std::string name() const;
  /// Support bounds used to place multi-value do grids. Bounded kinds return
  /// their exact support; unbounded kinds return central 95% quantiles of a
  /// fixed reference sample.
  std::pair<double, double> coordinate_range(int i) const;
};

/// Parse the CLI latent name (uniform, uniform-c, gmm, scm-s, scm-d).
LatentModel make_latent_model(const std::string& name, int d, std::uint64_t graph_seed);

enum class InterventionMode { Do, ImperfectSupportIndep };

struct InterventionSpec {
  int target = 0;
  std::vector<double> values;  // do-values (Do mode)
  InterventionMode mode = InterventionMode::Do;

  // Imperfect mode: z_target = lo + (hi - lo) * u^exp(strength * tanh(w . pa)),
  // u ~ Uniform(0, 1). The support [lo, hi] does not depend on the parents;
  // strength 0 is a perfect (parent-free) intervention.
  double low = -2.0;
  double high = 2.0;
  double parent_strength = 1.0;

  int num_values() const { return mode == InterventionMode::Do ? static_cast<int>(values.size()) : 1; }

  static InterventionSpec do_single(int target, double value);
  static InterventionSpec do_multi(int target, std::vector<double> values);
  static InterventionSpec imperfect(int target, double low, double high, double strength);
};

/// t evenly spaced points on [0.25, 0.75] of the interval [a, b]; t = 1
/// gives the midpoint.
std::vector<double> do_value_grid(int t, double a, double b);

/// m i.i.d. rows from P_Z.
Matrix sample_observational(const LatentModel& model, Eigen::Index m, std::uint64_t seed);

struct InterventionalSample {
  Matrix z;
  std::vector<int> value_index;
};

/// m rows from P_Z^(i). For Do mode the value index of each row is uniform
/// over spec.values; descendants of the target are propagated through their
/// mechanisms with the target clamped.
InterventionalSample sample_interventional(const LatentModel& model, const InterventionSpec& spec,
                                           Eigen::Index m, std::uint64_t seed);

}  // namespace crl
