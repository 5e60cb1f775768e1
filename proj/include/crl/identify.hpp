#pragma once

// Step 2: map the Step-1 encoding to a representation with per-latent
// structure, either from interventional rows (fixed-target regression) or
// from observational rows alone (independence of support). Also the
// descending search for an unknown decoder degree.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "crl/nets.hpp"
#include "crl/types.hpp"

namespace crl {

/// Random regression targets in (0, 1): targets[i][v] for latent i, value v.
std::vector<std::vector<double>> draw_targets(int latents, int values_per_latent, std::uint64_t seed);

/// encoded[i][v] holds the encodings of rows intervened on latent i with its
/// v-th value.
using EncodedInterventions = std::vector<std::vector<Matrix>>;

struct LinearGamma {
  Matrix gamma;                  // d x d_hat, row i is gamma_i
  std::vector<int> regularized;  // latents whose design was rank deficient
  Matrix apply(const Matrix& z_hat) const { return z_hat * gamma.transpose(); }
};

/// Least squares without intercept, one latent at a time, using only that
/// latent's interventional rows. Rank-deficient designs fall back to a small
/// ridge and are listed in `regularized`.
LinearGamma fit_linear_gamma(const EncodedInterventions& encoded, const std::vector<std::vector<double>>& targets,
                             double ridge = 1e-8);

struct NonlinearGamma {
  std::vector<nets::Mlp> maps;  // one scalar regressor per latent
  std::vector<bool> converged;
  Matrix apply(const Matrix& z_hat) const;
};

NonlinearGamma fit_nonlinear_gamma(const EncodedInterventions& encoded,
                                   const std::vector<std::vector<double>>& targets,
                                   const nets::RegressorHyper& hp);

using IndexPair = std::pair<int, int>;

/// All (k, m) with k < m.
std::vector<IndexPair> unordered_pairs(int d);

struct HausdorffLoss {
  double value = 0.0;
  Matrix grad;  // same shape as the point batch
};

/// For every listed pair (k, m): the directed Hausdorff distance from the
/// batch's product grid {(p_ak, p_bm)} to its joint points {(p_jk, p_jm)},
/// summed over pairs. The gradient runs through the achieving product point
/// and its nearest joint point (first maximum, lowest-index minimum).
HausdorffLoss hausdorff_support_loss(const Matrix& points, const std::vector<IndexPair>& pairs);

struct IosHyper {
  double lambda = 10.0;
  int batch_size = 256;
  int epochs = 60;
  double lr = 3e-3;
  std::uint64_t seed = 0;
  std::vector<IndexPair> pairs;  // empty: every pair
  // Start 0 is the identity, later ones random orthogonal matrices; the fit
  // with the lowest last-epoch loss is kept.
  int restarts = 3;
  bool operator==(const IosHyper&) const = default;
};

struct IosGamma {
  nets::InputMap pre;  // whitening of z_hat fitted on the training rows
  Matrix gamma;        // d_hat x d_hat, rows kept at unit norm
  Matrix gamma_inv;    // learned approximate inverse
  std::vector<double> loss;  // per epoch
  double det = 0.0;
  bool singular = false;

  Matrix apply(const Matrix& z_hat) const { return pre.apply(z_hat) * gamma.transpose(); }
};

/// Minimizes |G' G y - y|^2 + lambda * sum_{k != m} HD over minibatches of the
/// whitened encodings y. Unordered pairs are evaluated once and weighted by
/// two, which is the same sum since the distance is symmetric in (k, m).
/// Throws if every start ends with a non-finite loss.
IosGamma fit_ios_gamma(const Matrix& z_hat, const IosHyper& hp);

struct DegreeTrial {
  int degree = 0;
  double relative_val_mse = 0.0;  // validation MSE over mean x variance
  bool passed = false;
  int attempts = 0;
};

struct DegreeSelection {
  int degree = -1;  // -1: no degree met the threshold
  double threshold = 0.01;
  std::vector<DegreeTrial> trials;
};

/// Trains a polynomial-head autoencoder for s = s_max, s_max - 1, ... and
/// returns the last degree that met the threshold before the first one that
/// failed. A degree fails only after `restarts` fresh initializations miss
/// (plus one warm start from the encoder of the degree above).
DegreeSelection degree_selection(const Matrix& x_train, const Matrix& x_val, int latent_dim, int s_max,
                                 const nets::TrainHyper& hp, double threshold = 0.01, int restarts = 1);

}  // namespace crl
