#pragma once

// Multivariate polynomial feature maps over distinct-entry monomials.
//
// A degree-p polynomial map in d variables is written g(z) = G u(z), where
// u(z) stacks every distinct monomial of total degree <= p (the constant,
// z, z (x) z without repeated entries, ...). MonomialBasis enumerates u in
// graded-lexicographic order and evaluates it row-wise over batches.

#include <cstddef>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "crl/types.hpp"

namespace crl {

/// Number of monomials of total degree <= p in d variables, C(p + d, d).
/// Throws std::length_error if the count exceeds `limit`.
std::size_t monomial_count(int latent_dim, int degree,
                           std::size_t limit = 1'000'000);

class MonomialBasis {
 public:
  using Exponent = std::vector<int>;

  /// One term of d(monomial j)/d(z_var) = coeff * monomial(lower).
  struct DerivativeLink {
    Eigen::Index monomial;
    int var;
    int coeff;
    Eigen::Index lower;
  };

  MonomialBasis() = default;
  MonomialBasis(int latent_dim, int degree);

  int latent_dim() const { return latent_dim_; }
  int degree() const { return degree_; }
  Eigen::Index size() const { return static_cast<Eigen::Index>(exponents_.size()); }
  const std::vector<Exponent>& exponents() const { return exponents_; }
  const Exponent& exponent(Eigen::Index j) const { return exponents_[static_cast<std::size_t>(j)]; }
  int total_degree(Eigen::Index j) const;
  std::optional<Eigen::Index> index_of(const Exponent& e) const;
  const std::vector<DerivativeLink>& derivative_links() const { return links_; }

  /// Row-wise features: z is m x d, result is m x q. Each monomial is built
  /// as (lower-degree monomial) * z_pivot so the cost is one product per
  /// entry.
  template <typename Derived>
  Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, Eigen::Dynamic>
  featurize(const Eigen::MatrixBase<Derived>& z) const {
    using Scalar = typename Derived::Scalar;
    require_dims(z.cols() == latent_dim_, "featurize: latent dimension mismatch");
    Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic> phi(z.rows(), size());
    phi.col(0).setOnes();
    for (Eigen::Index j = 1; j < size(); ++j) {
      const auto& step = build_[static_cast<std::size_t>(j)];
      phi.col(j) = phi.col(step.first).cwiseProduct(z.col(step.second));
    }
    return phi;
  }

  /// Single-sample convenience overload.
  Vector featurize_one(const Vector& z) const;

  /// Backpropagates d(loss)/d(phi) to d(loss)/dz given the inputs z and the
  /// features phi = featurize(z).
  Matrix featurize_backward(const Matrix& phi, const Matrix& grad_phi) const;

 private:
  int latent_dim_ = 0;
  int degree_ = 0;
  std::vector<Exponent> exponents_;
  std::map<Exponent, Eigen::Index> lookup_;
  // For j > 0: (index of e_j minus the unit at its first nonzero var, var).
  std::vector<std::pair<Eigen::Index, int>> build_;
  std::vector<DerivativeLink> links_;
};

struct RankReport {
  Eigen::Index rank = 0;
  Eigen::Index columns = 0;
  bool full_rank = false;
  Vector singular_values;
};

/// Numeric column rank: singular values above rel_tol * sigma_max count.
RankReport numeric_rank(const Matrix& m, double rel_tol = 1e-8);

/// Ground-truth polynomial decoder g(z) = G u(z).
class PolyDecoder {
 public:
  PolyDecoder() = default;
  /// `active` selects a subset of basis columns (sparse variant); inactive
  /// columns of G are zeroed.
  PolyDecoder(MonomialBasis basis, Matrix coefficients,
              std::optional<std::vector<bool>> active = std::nullopt);

  /// Dense decoder with i.i.d. standard normal coefficients.
  static PolyDecoder random(int latent_dim, int degree, int obs_dim, Rng& rng);

  /// Sparse variant: keeps the constant and degree-one terms, one pure power
  /// z_i^o with o >= (p + 1) / 2 for every i, and each remaining term with
  /// probability keep_prob.
  static PolyDecoder random_sparse(int latent_dim, int degree, int obs_dim,
                                   double keep_prob, Rng& rng);

  const MonomialBasis& basis() const { return basis_; }
  const Matrix& coefficients() const { return g_; }
  const std::optional<std::vector<bool>>& active() const { return active_; }
  int latent_dim() const { return basis_.latent_dim(); }
  int degree() const { return basis_.degree(); }
  Eigen::Index obs_dim() const { return g_.rows(); }

  /// z is m x d; returns m x n.
  Matrix decode(const Matrix& z) const;
  Vector decode_one(const Vector& z) const;

  /// Text record: d, p, n, optional mask, then G row-major with
  /// shortest round-trip formatting.
  std::string serialize() const;
  static PolyDecoder deserialize(const std::string& text);

  bool operator==(const PolyDecoder& other) const;

 private:
  MonomialBasis basis_;
  Matrix g_;
  std::optional<std::vector<bool>> active_;
};

/// Column-rank check on G (restricted to active columns for the sparse
/// variant). Full column rank implies g is injective.
RankReport check_injectivity(const PolyDecoder& dec, double rel_tol = 1e-8);

/// Polynomial stored as exponent vector -> coefficient. Used only for exact
/// degree bookkeeping of products.
class SparsePolynomial {
 public:
  explicit SparsePolynomial(int num_vars) : num_vars_(num_vars) {}

  int num_vars() const { return num_vars_; }
  void add_term(const std::vector<int>& exponent, double coeff);
  const std::map<std::vector<int>, double>& terms() const { return terms_; }
  bool empty() const { return terms_.empty(); }

  /// Highest total degree among nonzero terms; throws on the zero polynomial.
  int degree() const;

  SparsePolynomial operator*(const SparsePolynomial& other) const;

 private:
  int num_vars_;
  std::map<std::vector<int>, double> terms_;
};

/// Degree of the expanded product p1 * p2.
int symbolic_product_degree(const SparsePolynomial& p1, const SparsePolynomial& p2);

}  // namespace crl
