#include "crl/datagen.hpp"

#include <sstream>

namespace crl {

// -------------------------------------------------------------- NeuralDecoder

NeuralDecoder NeuralDecoder::random(int latent_dim, int obs_dim, int hidden, std::uint64_t seed) {
  if (hidden < latent_dim || obs_dim < hidden)
    throw std::invalid_argument("NeuralDecoder: need latent_dim <= hidden <= obs_dim for injectivity");
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  NeuralDecoder dec;
  const int dims[] = {latent_dim, hidden, hidden, obs_dim};
  for (int l = 0; l < 3; ++l) {
    Matrix w(dims[l], dims[l + 1]);
    const double scale = 1.0 / std::sqrt(static_cast<double>(dims[l]));
    for (Eigen::Index c = 0; c < w.cols(); ++c)
      for (Eigen::Index r = 0; r < w.rows(); ++r) w(r, c) = scale * normal(rng);
    RowVector b(dims[l + 1]);
    for (Eigen::Index c = 0; c < b.size(); ++c) b(c) = 0.5 * normal(rng);
    dec.weights_.push_back(std::move(w));
    dec.biases_.push_back(std::move(b));
  }
  return dec;
}

Matrix NeuralDecoder::decode(const Matrix& z) const {
  require_dims(z.cols() == latent_dim(), "NeuralDecoder::decode: latent dimension mismatch");
  Matrix a = z;
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    Matrix pre = a * weights_[l];
    pre.rowwise() += biases_[l];
    a = l + 1 < weights_.size() ? Matrix(pre.cwiseMax(0.0) + slope_ * pre.cwiseMin(0.0)) : pre;
  }
  return a;
}

std::string NeuralDecoder::serialize() const {
  io::KeyValueDoc doc;
  doc.set("format", std::string("crl-neural-decoder-1"));
  doc.set("slope", slope_);
  doc.set("layers", static_cast<int>(weights_.size()));
  for (std::size_t l = 0; l < weights_.size(); ++l) {
    std::ostringstream w;
    w << weights_[l].rows() << ' ' << weights_[l].cols();
    for (Eigen::Index r = 0; r < weights_[l].rows(); ++r)
      for (Eigen::Index c = 0; c < weights_[l].cols(); ++c) w << ' ' << io::format_double(weights_[l](r, c));
    doc.set("w" + std::to_string(l), w.str());
    std::ostringstream b;
    for (Eigen::Index c = 0; c < biases_[l].size(); ++c) b << (c ? " " : "") << io::format_double(biases_[l](c));
    doc.set("b" + std::to_string(l), b.str());
  }
  return doc.emit();
}

NeuralDecoder NeuralDecoder::deserialize(const std::string& text) {
  const auto doc = io::KeyValueDoc::parse(text);
  if (doc.require("format") != "crl-neural-decoder-1") throw FormatError("unknown neural decoder format");
  NeuralDecoder dec;
  dec.slope_ = doc.get_double("slope");
  const auto layers = doc.get_int("layers");
  for (std::int64_t l = 0; l < layers; ++l) {
    std::istringstream w(doc.require("w" + std::to_string(l)));
    Eigen::Index rows = 0, cols = 0;
    if (!(w >> rows >> cols)) throw FormatError("bad weight header");
    Matrix m(rows, cols);
    std::string tok;
    for (Eigen::Index r = 0; r < rows; ++r)
      for (Eigen::Index c = 0; c < cols; ++c) {
        if (!(w >> tok)) throw FormatError("weights truncated");
        m(r, c) = io::parse_double(tok);
      }
    std::istringstream b(doc.require("b" + std::to_string(l)));
    RowVector bias(cols);
    for (Eigen::Index c = 0; c < cols; ++c) {
      if (!(b >> tok)) throw FormatError("bias truncated");
      bias(c) = io::parse_double(tok);
    }
    dec.weights_.push_back(std::move(m));
    dec.biases_.push_back(std::move(bias));
  }
  return dec;
}

int decoder_latent_dim(const GroundTruthDecoder& g) {
  return std::visit([](const auto& d) { return d.latent_dim(); }, g);
}

Matrix decode(const GroundTruthDecoder& g, const Matrix& z) {
  return std::visit([&](const auto& d) { return d.decode(z); }, g);
}

// -------------------------------------------------------------------- Dataset

std::vector<Eigen::Index> Dataset::select(Split s, int tgt) const {
  std::vector<Eigen::Index> out;
  for (std::size_t r = 0; r < split.size(); ++r) {
    if (split[r] != s) continue;
    if (tgt == -2 || target[r] == tgt) out.push_back(static_cast<Eigen::Index>(r));
  }
  return out;
}

std::vector<Eigen::Index> Dataset::select_value(Split s, int tgt, int value) const {
  std::vector<Eigen::Index> out;
  for (std::size_t r = 0; r < split.size(); ++r)
    if (split[r] == s && target[r] == tgt && value_index[r] == value) out.push_back(static_cast<Eigen::Index>(r));
  return out;
}

namespace {

std::string spec_to_string(const InterventionSpec& s) {
  std::ostringstream o;
  if (s.mode == InterventionMode::Do) {
    o << "do " << s.target;
    for (double v : s.values) o << ' ' << io::format_double(v);
  } else {
    o << "imperfect " << s.target << ' ' << io::format_double(s.low) << ' ' << io::format_double(s.high) << ' '
      << io::format_double(s.parent_strength);
  }
  return o.str();
}

InterventionSpec spec_from_string(const std::string& text) {
  std::istringstream in(text);
  std::string kind, tok;
  int target = 0;
  if (!(in >> kind >> target)) throw FormatError("bad intervention spec '" + text + "'");
  if (kind == "do") {
    std::vector<double> values;
    while (in >> tok) values.push_back(io::parse_double(tok));
    return InterventionSpec::do_multi(target, std::move(values));
  }
  if (kind == "imperfect") {
    std::string lo, hi, st;
    if (!(in >> lo >> hi >> st)) throw FormatError("bad imperfect spec '" + text + "'");
    return InterventionSpec::imperfect(target, io::parse_double(lo), io::parse_double(hi), io::parse_double(st));
  }
  throw FormatError("unknown intervention kind '" + kind + "'");
}

bool same_spec(const InterventionSpec& a, const InterventionSpec& b) {
  return spec_to_string(a) == spec_to_string(b);
}

}  // namespace

bool Dataset::operator==(const Dataset& o) const {
  if (specs.size() != o.specs.size()) return false;
  for (std::size_t k = 0; k < specs.size(); ++k)
    if (!same_spec(specs[k], o.specs[k])) return false;
  return x.rows() == o.x.rows() && x.cols() == o.x.cols() && z.cols() == o.z.cols() && x == o.x && z == o.z &&
         split == o.split && target == o.target && value_index == o.value_index && provenance == o.provenance;
}

Dataset generate(const LatentModel& model, const GroundTruthDecoder& decoder,
                 const std::vector<InterventionSpec>& specs, const GenerateSizes& sizes, std::uint64_t seed) {
  require_dims(decoder_latent_dim(decoder) == model.d, "generate: decoder input dimension differs from latent dimension");
  for (const auto& s : specs)
    if (s.target < 0 || s.target >= model.d) throw std::out_of_range("generate: intervention target out of range");

  Dataset ds;
  ds.specs = specs;
  const Eigen::Index n_obs = sizes.observational.total();
  const Eigen::Index n_int = specs.empty() ? 0 : sizes.interventional.total();
  ds.z.resize(n_obs + n_int, model.d);
  ds.split.reserve(static_cast<std::size_t>(n_obs + n_int));

  auto label = [&](const SplitSizes& sz) {
    for (Eigen::Index r = 0; r < sz.train; ++r) ds.split.push_back(Split::Train);
    for (Eigen::Index r = 0; r < sz.val; ++r) ds.split.push_back(Split::Val);
    for (Eigen::Index r = 0; r < sz.test; ++r) ds.split.push_back(Split::Test);
  };

  if (n_obs > 0) ds.z.topRows(n_obs) = sample_observational(model, n_obs, derive_seed(seed, 1));
  label(sizes.observational);
  ds.target.assign(static_cast<std::size_t>(n_obs), -1);
  ds.value_index.assign(static_cast<std::size_t>(n_obs), -1);

  if (n_int > 0) {
    label(sizes.interventional);
    Rng pick_rng(derive_seed(seed, 2));
    std::uniform_int_distribution<std::size_t> pick(0, specs.size() - 1);
    std::vector<std::size_t> which(static_cast<std::size_t>(n_int));
    std::vector<Eigen::Index> count(specs.size(), 0);
    for (auto& w : which) {
      w = pick(pick_rng);
      ++count[w];
    }
    std::vector<InterventionalSample> samples;
    for (std::size_t k = 0; k < specs.size(); ++k)
      samples.push_back(count[k] ? sample_interventional(model, specs[k], count[k], derive_seed(seed, 100 + k))
                                 : InterventionalSample{});
    std::vector<Eigen::Index> used(specs.size(), 0);
    ds.target.resize(static_cast<std::size_t>(n_obs + n_int));
    ds.value_index.resize(static_cast<std::size_t>(n_obs + n_int));
    for (Eigen::Index r = 0; r < n_int; ++r) {
      const auto k = which[static_cast<std::size_t>(r)];
      const auto src = used[k]++;
      ds.z.row(n_obs + r) = samples[k].z.row(src);
      ds.target[static_cast<std::size_t>(n_obs + r)] = specs[k].target;
      ds.value_index[static_cast<std::size_t>(n_obs + r)] = samples[k].value_index[static_cast<std::size_t>(src)];
    }
  }
  ds.x = decode(decoder, ds.z);

  auto& p = ds.provenance;
  p.set("format", std::string("crl-dataset-1"));
  p.set("latent", model.name());
  p.set("d", model.d);
  p.set("seed", std::to_string(seed));
  p.set("interventions", static_cast<int>(specs.size()));
  for (std::size_t k = 0; k < specs.size(); ++k) p.set("spec." + std::to_string(k), spec_to_string(specs[k]));
  if (model.graph) {
    const auto g = model.graph->serialize();
    p.set("graph.fnv1a", std::to_string(io::fnv1a64(g)));
  }
  const std::string dec_text = std::visit([](const auto& d) { return d.serialize(); }, decoder);
  p.set("decoder.kind", std::string(std::holds_alternative<PolyDecoder>(decoder) ? "poly" : "neural"));
  p.set("decoder.fnv1a", std::to_string(io::fnv1a64(dec_text)));
  return ds;
}

void save(const Dataset& ds, const std::filesystem::path& path) {
  io::BinaryArchive ar;
  ar.put("x", ds.x);
  ar.put("z", ds.z);
  std::vector<std::int64_t> split, target, value;
  for (auto s : ds.split) split.push_back(static_cast<std::int64_t>(s));
  for (int t : ds.target) target.push_back(t);
  for (int v : ds.value_index) value.push_back(v);
  ar.put_ints("split", std::move(split));
  ar.put_ints("target", std::move(target));
  ar.put_ints("value_index", std::move(value));
  ar.put_string("provenance", ds.provenance.emit());
  ar.save(path);
  io::write_file(path.string() + ".meta", ds.provenance.emit());
}

Dataset load(const std::filesystem::path& path) {
  const auto ar = io::BinaryArchive::load(path);
  Dataset ds;
  ds.x = ar.matrix("x");
  ds.z = ar.matrix("z");
  const auto n = static_cast<std::size_t>(ds.x.rows());
  const auto& split = ar.ints("split");
  const auto& target = ar.ints("target");
  const auto& value = ar.ints("value_index");
  if (static_cast<std::size_t>(ds.z.rows()) != n || split.size() != n || target.size() != n || value.size() != n)
    throw FormatError("dataset row counts disagree");
  for (auto s : split) {
    if (s < 0 || s > 2) throw FormatError("bad split label");
    ds.split.push_back(static_cast<Split>(s));
  }
  ds.target.assign(target.begin(), target.end());
  ds.value_index.assign(value.begin(), value.end());
  ds.provenance = io::KeyValueDoc::parse(ar.string("provenance"));
  if (ds.provenance.require("format") != "crl-dataset-1") throw FormatError("unsupported dataset format");
  const auto count = ds.provenance.get_int("interventions");
  for (std::int64_t k = 0; k < count; ++k)
    ds.specs.push_back(spec_from_string(ds.provenance.require("spec." + std::to_string(k))));
  return ds;
}

}  // namespace crl
