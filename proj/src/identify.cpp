#include "crl/identify.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <optional>

#include "crl/poly_core.hpp"

namespace crl {

std::vector<std::vector<double>> draw_targets(int latents, int values_per_latent, std::uint64_t seed) {
  if (latents < 0 || values_per_latent < 1) throw std::invalid_argument("draw_targets: bad shape");
  Rng rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::vector<std::vector<double>> out(static_cast<std::size_t>(latents));
  for (auto& row : out) {
    row.resize(static_cast<std::size_t>(values_per_latent));
    for (auto& t : row) t = u(rng);
  }
  return out;
}

namespace {

void check_shapes(const EncodedInterventions& encoded, const std::vector<std::vector<double>>& targets) {
  require_dims(encoded.size() == targets.size(), "gamma fit: one target list per latent expected");
  for (std::size_t i = 0; i < encoded.size(); ++i)
    require_dims(encoded[i].size() == targets[i].size(), "gamma fit: one target per intervention value expected");
}

// Rows of every value for latent i, with the matching target column.
std::pair<Matrix, Vector> stack(const std::vector<Matrix>& blocks, const std::vector<double>& targets) {
  Eigen::Index rows = 0, cols = -1;
  for (const auto& b : blocks) {
    rows += b.rows();
    if (cols < 0) cols = b.cols();
    require_dims(b.cols() == cols, "gamma fit: encodings differ in width");
  }
  Matrix x(rows, std::max<Eigen::Index>(cols, 0));
  Vector y(rows);
  Eigen::Index at = 0;
  for (std::size_t v = 0; v < blocks.size(); ++v) {
    x.middleRows(at, blocks[v].rows()) = blocks[v];
    y.segment(at, blocks[v].rows()).setConstant(targets[v]);
    at += blocks[v].rows();
  }
  return {x, y};
}

}  // namespace

LinearGamma fit_linear_gamma(const EncodedInterventions& encoded, const std::vector<std::vector<double>>& targets,
                             double ridge) {
  check_shapes(encoded, targets);
  LinearGamma out;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const auto [x, y] = stack(encoded[i], targets[i]);
    if (i == 0) out.gamma.resize(static_cast<Eigen::Index>(encoded.size()), x.cols());
    require_dims(x.cols() == out.gamma.cols(), "fit_linear_gamma: encodings differ in width");
    const Eigen::ColPivHouseholderQR<Matrix> qr(x);
    Vector g;
    if (x.rows() >= x.cols() && qr.rank() == x.cols()) {
      g = qr.solve(y);
    } else {
      const Matrix gram = x.transpose() * x;
      const double scale = std::max(gram.trace() / std::max<Eigen::Index>(1, x.cols()), 1.0);
      g = (gram + ridge * scale * Matrix::Identity(x.cols(), x.cols())).ldlt().solve(x.transpose() * y);
      out.regularized.push_back(static_cast<int>(i));
    }
    out.gamma.row(static_cast<Eigen::Index>(i)) = g.transpose();
  }
  return out;
}

Matrix NonlinearGamma::apply(const Matrix& z_hat) const {
  Matrix out(z_hat.rows(), static_cast<Eigen::Index>(maps.size()));
  for (std::size_t i = 0; i < maps.size(); ++i) out.col(static_cast<Eigen::Index>(i)) = maps[i].predict(z_hat).col(0);
  return out;
}

NonlinearGamma fit_nonlinear_gamma(const EncodedInterventions& encoded,
                                   const std::vector<std::vector<double>>& targets,
                                   const nets::RegressorHyper& hp) {
  check_shapes(encoded, targets);
  NonlinearGamma out;
  for (std::size_t i = 0; i < encoded.size(); ++i) {
    const auto [x, y] = stack(encoded[i], targets[i]);
    auto h = hp;
    h.seed = derive_seed(hp.seed, i);
    auto fit = nets::fit_regressor(x, Matrix(y), h);
    out.converged.push_back(fit.converged);
    out.maps.push_back(std::move(fit.net));
  }
  return out;
}

std::vector<IndexPair> unordered_pairs(int d) {
  std::vector<IndexPair> out;
  for (int k = 0; k < d; ++k)
    for (int m = k + 1; m < d; ++m) out.emplace_back(k, m);
  return out;
}

namespace {

struct Achieving {
  double dist = -1.0;
  int a = -1, b = -1, j = -1;  // product point (a, b), joint point j
};

// max over product points of min distance to the joint points. Joint points
// are visited outward from the query's own rank along the first coordinate;
// a query stops as soon as it cannot beat the running maximum.
Achieving directed_hd(const Eigen::Ref<const Vector>& u, const Eigen::Ref<const Vector>& v) {
  const int m = static_cast<int>(u.size());
  std::vector<int> order(static_cast<std::size_t>(m));
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](int p, int q) { return u(p) < u(q); });
  std::vector<int> rank(static_cast<std::size_t>(m));
  for (int r = 0; r < m; ++r) rank[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = r;

  Achieving best;
  for (int a = 0; a < m; ++a) {
    const double qa = u(a);
    const int r0 = rank[static_cast<std::size_t>(a)];
    for (int b = 0; b < m; ++b) {
      const double qb = v(b);
      double near = std::numeric_limits<double>::infinity();
      int lo = r0, hi = r0 + 1;
      bool lo_open = true, hi_open = true;
      while ((lo_open || hi_open) && near > best.dist) {
        if (lo_open) {
          if (lo < 0) {
            lo_open = false;
          } else {
            const int j = order[static_cast<std::size_t>(lo)];
            const double dx = u(j) - qa;
            if (std::sqrt(dx * dx) >= near) {
              lo_open = false;
            } else {
              const double dy = v(j) - qb;
              near = std::min(near, std::sqrt(dx * dx + dy * dy));
              --lo;
            }
          }
        }
        if (hi_open && near > best.dist) {
          if (hi >= m) {
            hi_open = false;
          } else {
            const int j = order[static_cast<std::size_t>(hi)];
            const double dx = u(j) - qa;
            if (std::sqrt(dx * dx) >= near) {
              hi_open = false;
            } else {
              const double dy = v(j) - qb;
              near = std::min(near, std::sqrt(dx * dx + dy * dy));
              ++hi;
            }
          }
        }
      }
      if (near > best.dist) {
        best.dist = near;
        best.a = a;
        best.b = b;
      }
    }
  }
  // lowest-index nearest joint point for the winner
  double near = std::numeric_limits<double>::infinity();
  for (int j = 0; j < m; ++j) {
    const double dx = u(j) - u(best.a);
    const double dy = v(j) - v(best.b);
    const double dist = std::sqrt(dx * dx + dy * dy);
    if (dist < near) {
      near = dist;
      best.j = j;
    }
  }
  return best;
}

}  // namespace

HausdorffLoss hausdorff_support_loss(const Matrix& points, const std::vector<IndexPair>& pairs) {
  if (points.rows() < 2) throw std::invalid_argument("hausdorff_support_loss: need at least two points");
  HausdorffLoss out;
  out.grad = Matrix::Zero(points.rows(), points.cols());
  for (const auto& [k, m] : pairs) {
    if (k < 0 || m < 0 || k >= points.cols() || m >= points.cols() || k == m)
      throw std::out_of_range("hausdorff_support_loss: bad coordinate pair");
    const auto hit = directed_hd(points.col(k), points.col(m));
    out.value += hit.dist;
    if (hit.dist > 0.0) {
      const double gk = (points(hit.a, k) - points(hit.j, k)) / hit.dist;
      const double gm = (points(hit.b, m) - points(hit.j, m)) / hit.dist;
      out.grad(hit.a, k) += gk;
      out.grad(hit.b, m) += gm;
      out.grad(hit.j, k) -= gk;
      out.grad(hit.j, m) -= gm;
    }
  }
  return out;
}

namespace {

IosGamma fit_ios_from(const Matrix& y, const Matrix& init, const std::vector<IndexPair>& pairs, const IosHyper& hp,
                      std::uint64_t seed) {
  IosGamma out;
  out.gamma = init;
  out.gamma_inv = init.inverse();
  Matrix grad_g = Matrix::Zero(init.rows(), init.cols()), grad_gi = grad_g;
  const std::vector<nets::ParamView> params{{out.gamma.data(), grad_g.data(), out.gamma.size()},
                                            {out.gamma_inv.data(), grad_gi.data(), out.gamma_inv.size()}};
  nets::Adam opt(hp.lr);
  Rng rng(seed);
  std::vector<Eigen::Index> order(static_cast<std::size_t>(y.rows()));
  std::iota(order.begin(), order.end(), Eigen::Index{0});
  const auto batch = static_cast<std::size_t>(std::max(2, hp.batch_size));

  for (int epoch = 0; epoch < hp.epochs; ++epoch) {
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    int steps = 0;
    for (std::size_t start = 0; start + 2 <= order.size(); start += batch) {
      const auto stop = std::min(order.size(), start + batch);
      const std::vector<Eigen::Index> idx(order.begin() + static_cast<std::ptrdiff_t>(start),
                                          order.begin() + static_cast<std::ptrdiff_t>(stop));
      const Matrix xb = y(idx, Eigen::all);
      const double m = static_cast<double>(xb.rows());
      const Matrix t = xb * out.gamma.transpose();
      const Matrix r = t * out.gamma_inv.transpose() - xb;
      const auto hd = hausdorff_support_loss(t, pairs);
      total += r.squaredNorm() / m + hp.lambda * 2.0 * hd.value;
      grad_gi = (2.0 / m) * r.transpose() * t;
      const Matrix gt = (2.0 / m) * r * out.gamma_inv + hp.lambda * 2.0 * hd.grad;
      grad_g = gt.transpose() * xb;
      opt.step(params);
      out.gamma.rowwise().normalize();
      ++steps;
    }
    out.loss.push_back(steps ? total / steps : 0.0);
    if (!std::isfinite(out.loss.back())) break;
  }
  out.det = out.gamma.determinant();
  out.singular = !(std::abs(out.det) > 1e-6);
  return out;
}

}  // namespace

IosGamma fit_ios_gamma(const Matrix& z_hat, const IosHyper& hp) {
  if (z_hat.rows() < 2) throw std::invalid_argument("fit_ios_gamma: need at least two rows");
  if (hp.restarts < 1) throw std::invalid_argument("fit_ios_gamma: restarts must be at least 1");
  const Eigen::Index d = z_hat.cols();
  const auto pairs = hp.pairs.empty() ? unordered_pairs(static_cast<int>(d)) : hp.pairs;
  const auto pre = nets::fit_whitening(z_hat, 1e-9);
  const Matrix y = pre.apply(z_hat);

  std::optional<IosGamma> best;
  double best_last = 0.0;
  for (int r = 0; r < hp.restarts; ++r) {
    Matrix init = Matrix::Identity(d, d);
    if (r > 0) {
      Rng rng(derive_seed(hp.seed, 500 + static_cast<std::uint64_t>(r)));
      std::normal_distribution<double> nd;
      const Matrix a = Matrix::NullaryExpr(d, d, [&] { return nd(rng); });
      init = a.householderQr().householderQ();
    }
    auto fit = fit_ios_from(y, init, pairs, hp, r == 0 ? hp.seed : derive_seed(hp.seed, static_cast<std::uint64_t>(r)));
    const double last = fit.loss.empty() ? 0.0 : fit.loss.back();
    if (!std::isfinite(last)) continue;
    if (!best || last < best_last) {
      best = std::move(fit);
      best_last = last;
    }
  }
  if (!best) throw std::runtime_error("fit_ios_gamma: non-finite loss");
  best->pre = pre;
  return std::move(*best);
}

DegreeSelection degree_selection(const Matrix& x_train, const Matrix& x_val, int latent_dim, int s_max,
                                 const nets::TrainHyper& hp, double threshold, int restarts) {
  if (s_max < 1) throw std::invalid_argument("degree_selection: s_max must be at least 1");
  if (restarts < 1) throw std::invalid_argument("degree_selection: restarts must be at least 1");
  if (x_val.rows() < 2) throw std::invalid_argument("degree_selection: need validation rows");
  DegreeSelection out;
  out.threshold = threshold;
  const double var = (x_val.rowwise() - x_val.colwise().mean()).squaredNorm() / static_cast<double>(x_val.size());
  const int n = static_cast<int>(x_train.cols());
  // The encoder of the last passing degree is already affine in z, so the
  // next lower degree first starts from it with a least-squares head. That
  // attempt can only pass if the lower degree is enough.
  std::optional<nets::Autoencoder> prev;
  for (int s = s_max; s >= 1; --s) {
    DegreeTrial trial;
    trial.degree = s;
    trial.relative_val_mse = INFINITY;
    const int warm = prev ? 1 : 0;
    for (int r = 0; r < restarts + warm && !trial.passed; ++r) {
      const auto base = derive_seed(hp.seed, static_cast<std::uint64_t>(s));
      const int fresh = r - warm;
      Rng rng(fresh <= 0 ? base : derive_seed(base, static_cast<std::uint64_t>(fresh)));
      nets::Autoencoder model{nets::Mlp::encoder(n, latent_dim, rng), nets::PolyDecoderHead(latent_dim, s, n, rng), {}};
      if (fresh < 0) {
        model.encoder = prev->encoder;
        auto& head = std::get<nets::PolyDecoderHead>(model.decoder);
        const Matrix phi = head.basis().featurize(prev->encode(x_train));
        head.coefficients() = phi.colPivHouseholderQr().solve(prev->input.apply(x_train)).transpose();
      }
      auto h = hp;
      h.seed = derive_seed(hp.seed, 1000 + static_cast<std::uint64_t>(s) + 100 * static_cast<std::uint64_t>(r));
      auto res = nets::train_autoencoder(std::move(model), x_train, x_val, h);
      const double rel = nets::mse(res.model.reconstruct(x_val), x_val) / var;
      trial.relative_val_mse = std::min(trial.relative_val_mse, rel);
      trial.passed = trial.relative_val_mse < threshold;
      if (trial.passed) prev = std::move(res.model);
      ++trial.attempts;
    }
    out.trials.push_back(trial);
    if (!trial.passed) break;
    out.degree = s;
  }
  return out;
}

}  // namespace crl
