#pragma once

// Identification metrics: affine R^2, mean correlation coefficient with an
// optimal one-to-one matching, and block-structure overlap of a mixing
// matrix.

#include <cmath>
#include <string>
#include <vector>

#include "crl/types.hpp"

namespace crl {

/// Least squares targets ~ inputs * W^T + c (with intercept). Returns W as
/// targets.cols() x inputs.cols().
struct AffineMap {
  Matrix weight;
  Vector offset;
  Matrix apply(const Matrix& inputs) const {
    return (inputs * weight.transpose()).rowwise() + offset.transpose();
  }
};
AffineMap fit_affine(const Matrix& inputs, const Matrix& targets);

struct R2Result {
  double r2 = 0.0;           // mean over true coordinates
  Vector per_coordinate;
  AffineMap map;             // z ~ A z_hat + c
};

/// R^2 of the affine regression of each true latent on the representation.
R2Result r2_affine(const Matrix& z_hat, const Matrix& z);

/// |Pearson correlation| between columns of a (rows) and b (cols):
/// result(i, j) = |corr(a_i, b_j)|, zero where either column is constant.
template <typename DerivedA, typename DerivedB>
Eigen::Matrix<typename DerivedA::Scalar, Eigen::Dynamic, Eigen::Dynamic> abs_correlation(
    const Eigen::MatrixBase<DerivedA>& a, const Eigen::MatrixBase<DerivedB>& b) {
  using Scalar = typename DerivedA::Scalar;
  using M = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
  require_dims(a.rows() == b.rows() && a.rows() > 1, "abs_correlation: row mismatch");
  M ca = a.rowwise() - a.colwise().mean();
  M cb = b.rowwise() - b.colwise().mean();
  const auto na = ca.colwise().norm().eval();
  const auto nb = cb.colwise().norm().eval();
  M out = (ca.transpose() * cb).cwiseAbs();
  for (Eigen::Index i = 0; i < out.rows(); ++i)
    for (Eigen::Index j = 0; j < out.cols(); ++j) {
      const Scalar denom = na(i) * nb(j);
      out(i, j) = denom > Scalar(0) ? std::min<Scalar>(Scalar(1), out(i, j) / denom) : Scalar(0);
    }
  return out;
}

/// Minimum-cost assignment of every row to a distinct column (rows <= cols;
/// a wider-than-tall problem is solved on the transpose). Among optimal
/// assignments the lexicographically smallest column sequence is returned.
std::vector<int> assignment_solve(const Matrix& cost);
double assignment_cost(const Matrix& cost, const std::vector<int>& assignment);

struct MccResult {
  double mcc = 0.0;                // percentage
  std::vector<int> match;          // match[i] = representation column for true latent i
  Vector matched_corr;             // |corr| per true latent
};

/// 100 x mean matched |corr| between true latents z (m x d) and the
/// representation z_hat (m x d_hat, d_hat >= d).
MccResult mcc_detail(const Matrix& z_hat, const Matrix& z);
inline double mcc(const Matrix& z_hat, const Matrix& z) { return mcc_detail(z_hat, z).mcc; }

struct BlockScore {
  double overlap = 0.0;  // 0 = perfectly disjoint supports
  std::vector<int> row_support;
  int shared = 0;
  int possible = 0;
};

/// mixing is d_hat x d with z_hat ~ mixing * z + c. Entries with |a| above
/// rel_threshold * max|row| are treated as nonzero. The overlap is the
/// number of (m, j) with j in supp(a_k) and in supp(a_m), m in others,
/// divided by |supp(a_k)| * |others|.
BlockScore block_structure_score(const Matrix& mixing, int k, const std::vector<int>& others,
                                 double rel_threshold = 0.05);

struct MeanSe {
  double mean = 0.0;
  double se = 0.0;  // NaN for a single value
  int count = 0;
};
/// Mean and standard error (sample sd / sqrt(n)).
MeanSe mean_se(const std::vector<double>& values);

struct EvalReport {
  double r2 = NAN;
  double mcc_raw = NAN;
  double mcc_il = NAN;
  double mcc_ios = NAN;
  double recon_mse = NAN;
  double block_overlap = NAN;
};

}  // namespace crl
