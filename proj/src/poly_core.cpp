#include "crl/poly_core.hpp"

#include <algorithm>
#include <limits>
#include <sstream>

#include "crl/io.hpp"

namespace crl {

std::size_t monomial_count(int latent_dim, int degree, std::size_t limit) {
  if (latent_dim < 1) throw std::invalid_argument("latent dimension must be >= 1");
  if (degree < 0) throw std::invalid_argument("degree must be >= 0");
  // C(p + d, p) computed incrementally; every partial product is itself a
  // binomial coefficient so the division is exact.
  unsigned __int128 q = 1;
  for (int k = 1; k <= degree; ++k) {
    q = q * static_cast<unsigned>(latent_dim + k) / static_cast<unsigned>(k);
    if (q > limit) throw std::length_error("monomial basis too large (q > " + std::to_string(limit) + ")");
  }
  return static_cast<std::size_t>(q);
}

namespace {

// Appends all exponent vectors of exactly total degree r, lexicographically
// descending (z1^r first).
void enumerate_degree(int d, int r, std::vector<int>& cur, int var,
                      std::vector<std::vector<int>>& out) {
  if (var == d - 1) {
    cur[static_cast<std::size_t>(var)] = r;
    out.push_back(cur);
    return;
  }
  for (int e = r; e >= 0; --e) {
    cur[static_cast<std::size_t>(var)] = e;
    enumerate_degree(d, r - e, cur, var + 1, out);
  }
  cur[static_cast<std::size_t>(var)] = 0;
}

}  // namespace

MonomialBasis::MonomialBasis(int latent_dim, int degree)
    : latent_dim_(latent_dim), degree_(degree) {
  const auto q = monomial_count(latent_dim, degree);
  exponents_.reserve(q);
  std::vector<int> cur(static_cast<std::size_t>(latent_dim), 0);
  for (int r = 0; r <= degree; ++r) enumerate_degree(latent_dim, r, cur, 0, exponents_);

  for (std::size_t j = 0; j < exponents_.size(); ++j)
    lookup_.emplace(exponents_[j], static_cast<Eigen::Index>(j));

  build_.assign(exponents_.size(), {0, 0});
  for (std::size_t j = 1; j < exponents_.size(); ++j) {
    auto e = exponents_[j];
    const auto pivot = static_cast<int>(std::find_if(e.begin(), e.end(), [](int v) { return v > 0; }) - e.begin());
    e[static_cast<std::size_t>(pivot)] -= 1;
    build_[j] = {lookup_.at(e), pivot};
  }
  for (std::size_t j = 1; j < exponents_.size(); ++j) {
    for (int i = 0; i < latent_dim; ++i) {
      const int c = exponents_[j][static_cast<std::size_t>(i)];
      if (c == 0) continue;
      auto e = exponents_[j];
      e[static_cast<std::size_t>(i)] -= 1;
      links_.push_back({static_cast<Eigen::Index>(j), i, c, lookup_.at(e)});
    }
  }
}

int MonomialBasis::total_degree(Eigen::Index j) const {
  int s = 0;
  for (int v : exponent(j)) s += v;
  return s;
}

std::optional<Eigen::Index> MonomialBasis::index_of(const Exponent& e) const {
  auto it = lookup_.find(e);
  if (it == lookup_.end()) return std::nullopt;
  return it->second;
}

Vector MonomialBasis::featurize_one(const Vector& z) const {
  return featurize(z.transpose()).row(0).transpose();
}

Matrix MonomialBasis::featurize_backward(const Matrix& phi, const Matrix& grad_phi) const {
  require_dims(phi.cols() == size() && grad_phi.cols() == size() && phi.rows() == grad_phi.rows(),
               "featurize_backward: shape mismatch");
  Matrix grad_z = Matrix::Zero(phi.rows(), latent_dim_);
  for (const auto& link : links_)
    grad_z.col(link.var).array() +=
        static_cast<double>(link.coeff) * grad_phi.col(link.monomial).array() * phi.col(link.lower).array();
  return grad_z;
}

RankReport numeric_rank(const Matrix& m, double rel_tol) {
  RankReport rep;
  rep.columns = m.cols();
  if (m.size() == 0) return rep;
  Eigen::BDCSVD<Matrix> svd(m);
  rep.singular_values = svd.singularValues();
  const double smax = rep.singular_values.size() ? rep.singular_values(0) : 0.0;
  if (smax > 0.0)
    rep.rank = (rep.singular_values.array() > rel_tol * smax).count();
  rep.full_rank = rep.rank == m.cols();
  return rep;
}

// ---------------------------------------------------------------- PolyDecoder

PolyDecoder::PolyDecoder(MonomialBasis basis, Matrix coefficients,
                         std::optional<std::vector<bool>> active)
    : basis_(std::move(basis)), g_(std::move(coefficients)), active_(std::move(active)) {
  require_dims(g_.cols() == basis_.size(), "PolyDecoder: G must have one column per monomial");
  if (active_) {
    require_dims(static_cast<Eigen::Index>(active_->size()) == basis_.size(),
                 "PolyDecoder: mask length must equal the basis size");
    for (Eigen::Index j = 0; j < g_.cols(); ++j)
      if (!(*active_)[static_cast<std::size_t>(j)]) g_.col(j).setZero();
  }
}

PolyDecoder PolyDecoder::random(int latent_dim, int degree, int obs_dim, Rng& rng) {
  MonomialBasis basis(latent_dim, degree);
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(obs_dim, basis.size());
  for (Eigen::Index r = 0; r < g.rows(); ++r)
    for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = normal(rng);
  return PolyDecoder(std::move(basis), std::move(g));
}

PolyDecoder PolyDecoder::random_sparse(int latent_dim, int degree, int obs_dim,
                                       double keep_prob, Rng& rng) {
  MonomialBasis basis(latent_dim, degree);
  std::vector<bool> active(static_cast<std::size_t>(basis.size()), false);
  std::bernoulli_distribution keep(keep_prob);
  const int min_power = (degree + 2) / 2;  // ceil((p + 1) / 2)
  std::uniform_int_distribution<int> pick_power(std::max(min_power, 1), std::max(degree, 1));
  std::vector<int> forced_power(static_cast<std::size_t>(latent_dim));
  for (auto& o : forced_power) o = pick_power(rng);
  for (Eigen::Index j = 0; j < basis.size(); ++j) {
    const auto& e = basis.exponent(j);
    const int deg = basis.total_degree(j);
    bool on = deg <= 1;
    if (!on) {
      const auto nz = std::count_if(e.begin(), e.end(), [](int v) { return v > 0; });
      if (nz == 1) {
        const auto var = std::find_if(e.begin(), e.end(), [](int v) { return v > 0; }) - e.begin();
        on = forced_power[static_cast<std::size_t>(var)] == deg;
      }
    }
    if (!on) on = keep(rng);
    active[static_cast<std::size_t>(j)] = on;
  }
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix g(obs_dim, basis.size());
  for (Eigen::Index r = 0; r < g.rows(); ++r)
    for (Eigen::Index c = 0; c < g.cols(); ++c) g(r, c) = normal(rng);
  return PolyDecoder(std::move(basis), std::move(g), std::move(active));
}

Matrix PolyDecoder::decode(const Matrix& z) const {
  require_dims(z.cols() == latent_dim(), "decode: latent dimension mismatch");
  return basis_.featurize(z) * g_.transpose();
}

Vector PolyDecoder::decode_one(const Vector& z) const { return g_ * basis_.featurize_one(z); }

std::string PolyDecoder::serialize() const {
  io::KeyValueDoc doc;
  doc.set("format", std::string("crl-poly-decoder-1"));
  doc.set("d", latent_dim());
  doc.set("p", degree());
  doc.set("n", static_cast<std::int64_t>(obs_dim()));
  if (active_) {
    std::string mask;
    for (bool b : *active_) mask += b ? '1' : '0';
    doc.set("mask", mask);
  }
  std::ostringstream g;
  for (Eigen::Index r = 0; r < g_.rows(); ++r)
    for (Eigen::Index c = 0; c < g_.cols(); ++c) g << (r || c ? " " : "") << io::format_double(g_(r, c));
  doc.set("G", g.str());
  return doc.emit();
}

PolyDecoder PolyDecoder::deserialize(const std::string& text) {
  const auto doc = io::KeyValueDoc::parse(text);
  if (doc.require("format") != "crl-poly-decoder-1") throw FormatError("unknown poly decoder format");
  const int d = static_cast<int>(doc.get_int("d"));
  const int p = static_cast<int>(doc.get_int("p"));
  const auto n = static_cast<Eigen::Index>(doc.get_int("n"));
  MonomialBasis basis(d, p);
  std::optional<std::vector<bool>> active;
  if (auto mask = doc.get("mask")) {
    if (static_cast<Eigen::Index>(mask->size()) != basis.size()) throw FormatError("mask length mismatch");
    active.emplace();
    for (char c : *mask) {
      if (c != '0' && c != '1') throw FormatError("mask must be 0/1");
      active->push_back(c == '1');
    }
  }
  Matrix g(n, basis.size());
  std::istringstream in(doc.require("G"));
  std::string tok;
  for (Eigen::Index r = 0; r < g.rows(); ++r)
    for (Eigen::Index c = 0; c < g.cols(); ++c) {
      if (!(in >> tok)) throw FormatError("G truncated");
      g(r, c) = io::parse_double(tok);
    }
  if (in >> tok) throw FormatError("G has extra entries");
  return PolyDecoder(std::move(basis), std::move(g), std::move(active));
}

bool PolyDecoder::operator==(const PolyDecoder& other) const {
  return latent_dim() == other.latent_dim() && degree() == other.degree() &&
         g_.rows() == other.g_.rows() && g_ == other.g_ && active_ == other.active_;
}

RankReport check_injectivity(const PolyDecoder& dec, double rel_tol) {
  if (!dec.active()) return numeric_rank(dec.coefficients(), rel_tol);
  const auto& act = *dec.active();
  std::vector<Eigen::Index> cols;
  for (std::size_t j = 0; j < act.size(); ++j)
    if (act[j]) cols.push_back(static_cast<Eigen::Index>(j));
  return numeric_rank(dec.coefficients()(Eigen::all, cols), rel_tol);
}

// ----------------------------------------------------------- SparsePolynomial

void SparsePolynomial::add_term(const std::vector<int>& exponent, double coeff) {
  require_dims(static_cast<int>(exponent.size()) == num_vars_, "add_term: exponent length mismatch");
  if (coeff == 0.0) return;
  auto [it, inserted] = terms_.emplace(exponent, coeff);
  if (!inserted) {
    it->second += coeff;
    if (it->second == 0.0) terms_.erase(it);
  }
}

int SparsePolynomial::degree() const {
  if (terms_.empty()) throw std::invalid_argument("degree of the zero polynomial is undefined");
  int best = 0;
  for (const auto& [e, c] : terms_) {
    int s = 0;
    for (int v : e) s += v;
    best = std::max(best, s);
  }
  return best;
}

SparsePolynomial SparsePolynomial::operator*(const SparsePolynomial& other) const {
  require_dims(num_vars_ == other.num_vars_, "polynomial product: variable count mismatch");
  SparsePolynomial out(num_vars_);
  std::vector<int> e(static_cast<std::size_t>(num_vars_));
  for (const auto& [e1, c1] : terms_)
    for (const auto& [e2, c2] : other.terms_) {
      for (std::size_t i = 0; i < e.size(); ++i) e[i] = e1[i] + e2[i];
      out.add_term(e, c1 * c2);
    }
  return out;
}

int symbolic_product_degree(const SparsePolynomial& p1, const SparsePolynomial& p2) {
  if (p1.empty() || p2.empty()) throw std::invalid_argument("symbolic_product_degree: empty polynomial");
  return (p1 * p2).degree();
}

}  // namespace crl
