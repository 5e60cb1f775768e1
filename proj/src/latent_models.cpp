#include "crl/latent_models.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "crl/io.hpp"

namespace crl {

std::vector<int> ScmGraph::parents(int node) const {
  std::vector<int> out;
  for (int i = 0; i < node; ++i)
    if (has_edge(i, node)) out.push_back(i);
  return out;
}

int ScmGraph::edge_count() const { return static_cast<int>((weights.array() != 0.0).count()); }

ScmGraph ScmGraph::chain(int d, double weight, NoiseKind noise) {
  ScmGraph g;
  g.d = d;
  g.weights = Matrix::Zero(d, d);
  for (int i = 0; i + 1 < d; ++i) g.weights(i, i + 1) = weight;
  g.noise_std = Vector::Ones(d);
  g.noise = noise;
  return g;
}

std::string ScmGraph::serialize() const {
  io::KeyValueDoc doc;
  doc.set("format", std::string("crl-scm-graph-1"));
  doc.set("d", d);
  doc.set("noise", std::string(noise == NoiseKind::Gaussian ? "gaussian" : "uniform"));
  doc.set("mechanism", std::string(mechanism == Mechanism::Additive ? "additive" : "bounded"));
  doc.set("bounded_strength", bounded_strength);
  std::ostringstream sd;
  for (int i = 0; i < d; ++i) sd << (i ? " " : "") << io::format_double(noise_std(i));
  doc.set("noise_std", sd.str());
  std::ostringstream edges;
  bool first = true;
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (weights(i, j) != 0.0) {
        edges << (first ? "" : "; ") << i << ' ' << j << ' ' << io::format_double(weights(i, j));
        first = false;
      }
  doc.set("edges", edges.str());
  return doc.emit();
}

ScmGraph ScmGraph::deserialize(const std::string& text) {
  const auto doc = io::KeyValueDoc::parse(text);
  if (doc.require("format") != "crl-scm-graph-1") throw FormatError("unknown graph format");
  ScmGraph g;
  g.d = static_cast<int>(doc.get_int("d"));
  const auto noise = doc.require("noise");
  if (noise == "gaussian") g.noise = NoiseKind::Gaussian;
  else if (noise == "uniform") g.noise = NoiseKind::Uniform;
  else throw FormatError("unknown noise kind '" + noise + "'");
  const auto mech = doc.get("mechanism").value_or("additive");
  if (mech == "additive") g.mechanism = Mechanism::Additive;
  else if (mech == "bounded") g.mechanism = Mechanism::Bounded;
  else throw FormatError("unknown mechanism '" + mech + "'");
  if (const auto c = doc.get("bounded_strength")) g.bounded_strength = io::parse_double(*c);
  g.noise_std.resize(g.d);
  std::istringstream sd(doc.require("noise_std"));
  std::string tok;
  for (int i = 0; i < g.d; ++i) {
    if (!(sd >> tok)) throw FormatError("noise_std truncated");
    g.noise_std(i) = io::parse_double(tok);
  }
  g.weights = Matrix::Zero(g.d, g.d);
  std::string edges = doc.require("edges");
  std::replace(edges.begin(), edges.end(), ';', '\n');
  std::istringstream es(edges);
  std::string line;
  while (std::getline(es, line)) {
    std::istringstream ls(line);
    std::string a, b, w;
    if (!(ls >> a)) continue;
    if (!(ls >> b >> w)) throw FormatError("bad edge entry '" + line + "'");
    const auto i = io::parse_int(a), j = io::parse_int(b);
    if (i < 0 || j <= i || j >= g.d) throw FormatError("edge must satisfy 0 <= from < to < d");
    g.weights(i, j) = io::parse_double(w);
  }
  return g;
}

ScmGraph sample_scm_graph(int d, double density, std::uint64_t seed) {
  if (!(density > 0.0)) throw std::invalid_argument("sample_scm_graph: density must be > 0");
  Rng rng(seed);
  ScmGraph g;
  g.d = d;
  g.weights = Matrix::Zero(d, d);
  g.noise_std = Vector::Ones(d);
  const double p = d > 1 ? std::min(1.0, 2.0 * density / (d - 1)) : 0.0;
  std::bernoulli_distribution edge(p);
  std::uniform_real_distribution<double> magnitude(0.5, 1.5);
  std::bernoulli_distribution sign(0.5);
  for (int i = 0; i < d; ++i)
    for (int j = i + 1; j < d; ++j) {
      const bool present = edge(rng);
      const double w = magnitude(rng) * (sign(rng) ? 1.0 : -1.0);
      if (present) g.weights(i, j) = w;
    }
  return g;
}

std::set<int> ancestors(const ScmGraph& graph, int node) {
  if (node < 0 || node >= graph.d) throw std::out_of_range("ancestors: node out of range");
  std::set<int> out;
  std::vector<int> stack{node};
  while (!stack.empty()) {
    const int cur = stack.back();
    stack.pop_back();
    for (int p : graph.parents(cur))
      if (out.insert(p).second) stack.push_back(p);
  }
  return out;
}

// ---------------------------------------------------------------- LatentModel

LatentModel LatentModel::uniform(int d, double low, double high) {
  LatentModel m;
  m.kind = LatentKind::Uniform;
  m.d = d;
  m.low = low;
  m.high = high;
  return m;
}

LatentModel LatentModel::uniform_correlated(int d) {
  if (d % 2 != 0) throw std::invalid_argument("uniform-correlated latents need an even dimension");
  LatentModel m;
  m.kind = LatentKind::UniformCorrelated;
  m.d = d;
  return m;
}

LatentModel LatentModel::gaussian_mixture(int d) {
  LatentModel m;
  m.kind = LatentKind::GaussianMixture;
  m.d = d;
  return m;
}

LatentModel LatentModel::scm(ScmGraph graph) {
  LatentModel m;
  m.kind = LatentKind::ScmLinear;
  m.d = graph.d;
  m.graph = std::move(graph);
  return m;
}

std::string LatentModel::name() const {
  switch (kind) {
    case LatentKind::Uniform: return "uniform";
    case LatentKind::UniformCorrelated: return "uniform-c";
    case LatentKind::GaussianMixture: return "gmm";
    case LatentKind::ScmLinear: return "scm";
  }
  return "unknown";
}

LatentModel make_latent_model(const std::string& name, int d, std::uint64_t graph_seed) {
  if (name == "uniform") return LatentModel::uniform(d);
  if (name == "uniform-c") return LatentModel::uniform_correlated(d);
  if (name == "gmm") return LatentModel::gaussian_mixture(d);
  if (name == "scm-s") return LatentModel::scm(sample_scm_graph(d, 0.5, graph_seed));
  if (name == "scm-d") return LatentModel::scm(sample_scm_graph(d, 1.0, graph_seed));
  throw std::invalid_argument("unknown latent kind '" + name + "'");
}

namespace {

// Draws one row of noise and assembles an SCM sample. `clamp` fixes one node
// to a value; `mechanism` overrides one node's mechanism.
struct RowSampler {
  const LatentModel& model;
  Rng& rng;
  std::uniform_real_distribution<double> unit{0.0, 1.0};
  std::normal_distribution<double> normal{0.0, 1.0};
  std::bernoulli_distribution mix{0.5};

  double noise(NoiseKind kind) {
    if (kind == NoiseKind::Gaussian) return normal(rng);
    return std::sqrt(3.0) * (2.0 * unit(rng) - 1.0);
  }

  void fill(Eigen::Ref<RowVector> row) {
    switch (model.kind) {
      case LatentKind::Uniform:
        for (int i = 0; i < model.d; ++i) row(i) = model.low + (model.high - model.low) * unit(rng);
        break;
      case LatentKind::UniformCorrelated: {
        std::bernoulli_distribution b1(model.confounder_p1), b2(model.confounder_p2);
        for (int i = 0; i + 1 < model.d; i += 2) {
          const bool c1 = b1(rng);
          const bool c2 = b2(rng);
          const double u1 = unit(rng), u2 = unit(rng);
          const double w1 = model.first_half_width, w2 = model.second_half_width;
          row(i) = c1 ? w1 * u1 : -w1 * u1;
          row(i + 1) = (c1 != c2) ? w2 * u2 : -w2 * u2;
        }
        break;
      }
      case LatentKind::GaussianMixture:
        for (int i = 0; i < model.d; ++i) {
          const int k = mix(rng) ? 1 : 0;
          row(i) = model.mixture_mean[k] + model.mixture_std[k] * normal(rng);
        }
        break;
      case LatentKind::ScmLinear:
        fill_scm(row, -1, 0.0, nullptr);
        break;
    }
  }

  // Topological pass. Node `target` is clamped to `value` when spec is null,
  // otherwise drawn from the imperfect mechanism of spec.
  void fill_scm(Eigen::Ref<RowVector> row, int target, double value, const InterventionSpec* spec) {
    const auto& g = *model.graph;
    for (int j = 0; j < g.d; ++j) {
      double pa = 0.0;
      for (int i = 0; i < j; ++i)
        if (g.weights(i, j) != 0.0) pa += g.weights(i, j) * row(i);
      if (j != target && g.mechanism == Mechanism::Bounded) {
        const double u = unit(rng);
        row(j) = std::sqrt(3.0) * g.noise_std(j) * (2.0 * std::pow(u, std::exp(g.bounded_strength * std::tanh(pa))) - 1.0);
        continue;
      }
      const double eps = noise(g.noise) * g.noise_std(j);
      if (j != target) {
        row(j) = pa + eps;
      } else if (spec == nullptr) {
        row(j) = value;
      } else {
        row(j) = imperfect_value(*spec, pa);
      }
    }
  }

  double imperfect_value(const InterventionSpec& spec, double parent_signal) {
    const double u = unit(rng);
    const double shape = std::exp(spec.parent_strength * std::tanh(parent_signal));
    return spec.low + (spec.high - spec.low) * std::pow(u, shape);
  }
};

}  // namespace

std::pair<double, double> LatentModel::coordinate_range(int i) const {
  switch (kind) {
    case LatentKind::Uniform: return {low, high};
    case LatentKind::UniformCorrelated: {
      const double w = (i % 2 == 0) ? first_half_width : second_half_width;
      return {-w, w};
    }
    default: break;
  }
  constexpr Eigen::Index kRef = 20000;
  const Matrix ref = sample_observational(*this, kRef, 0x5EEDULL);
  std::vector<double> col(ref.col(i).data(), ref.col(i).data() + kRef);
  std::sort(col.begin(), col.end());
  return {col[static_cast<std::size_t>(0.025 * kRef)], col[static_cast<std::size_t>(0.975 * kRef)]};
}

InterventionSpec InterventionSpec::do_single(int target, double value) {
  return do_multi(target, {value});
}

InterventionSpec InterventionSpec::do_multi(int target, std::vector<double> values) {
  if (values.empty()) throw std::invalid_argument("do intervention needs at least one value");
  InterventionSpec s;
  s.target = target;
  s.values = std::move(values);
  s.mode = InterventionMode::Do;
  return s;
}

InterventionSpec InterventionSpec::imperfect(int target, double low, double high, double strength) {
  if (!(high > low)) throw std::invalid_argument("imperfect intervention needs high > low");
  InterventionSpec s;
  s.target = target;
  s.mode = InterventionMode::ImperfectSupportIndep;
  s.low = low;
  s.high = high;
  s.parent_strength = strength;
  return s;
}

std::vector<double> do_value_grid(int t, double a, double b) {
  if (t < 1) throw std::invalid_argument("do_value_grid: t must be >= 1");
  std::vector<double> out;
  for (int j = 0; j < t; ++j) {
    const double u = t == 1 ? 0.5 : 0.25 + 0.5 * static_cast<double>(j) / (t - 1);
    out.push_back(a + (b - a) * u);
  }
  return out;
}

Matrix sample_observational(const LatentModel& model, Eigen::Index m, std::uint64_t seed) {
  if (m < 1) throw std::invalid_argument("sample_observational: m must be >= 1");
  Rng rng(seed);
  RowSampler s{model, rng};
  Matrix z(m, model.d);
  RowVector row(model.d);
  for (Eigen::Index r = 0; r < m; ++r) {
    s.fill(row);
    z.row(r) = row;
  }
  return z;
}

InterventionalSample sample_interventional(const LatentModel& model, const InterventionSpec& spec,
                                           Eigen::Index m, std::uint64_t seed) {
  if (spec.target < 0 || spec.target >= model.d)
    throw std::out_of_range("sample_interventional: target index out of range");
  if (spec.mode == InterventionMode::Do && spec.values.empty())
    throw std::invalid_argument("sample_interventional: do intervention without values");
  Rng rng(seed);
  RowSampler s{model, rng};
  InterventionalSample out;
  out.z.resize(m, model.d);
  out.value_index.assign(static_cast<std::size_t>(m), 0);
  std::uniform_int_distribution<int> pick(0, std::max(0, spec.num_values() - 1));
  RowVector row(model.d);
  for (Eigen::Index r = 0; r < m; ++r) {
    const int k = pick(rng);
    out.value_index[static_cast<std::size_t>(r)] = k;
    if (model.kind == LatentKind::ScmLinear) {
      if (spec.mode == InterventionMode::Do)
        s.fill_scm(row, spec.target, spec.values[static_cast<std::size_t>(k)], nullptr);
      else
        s.fill_scm(row, spec.target, 0.0, &spec);
    } else {
      s.fill(row);
      row(spec.target) = spec.mode == InterventionMode::Do ? spec.values[static_cast<std::size_t>(k)]
                                                           : s.imperfect_value(spec, 0.0);
    }
    out.z.row(r) = row;
  }
  return out;
}

}  // namespace crl
