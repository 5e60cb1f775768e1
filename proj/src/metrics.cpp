#include "crl/metrics.hpp"

#include <algorithm>
#include <limits>
#include <numeric>

namespace crl {

AffineMap fit_affine(const Matrix& inputs, const Matrix& targets) {
  require_dims(inputs.rows() == targets.rows(), "fit_affine: row mismatch");
  if (inputs.rows() <= inputs.cols() + 1) throw std::invalid_argument("fit_affine: need more rows than inputs + 1");
  const RowVector mu_in = inputs.colwise().mean();
  const RowVector mu_out = targets.colwise().mean();
  const Matrix xc = inputs.rowwise() - mu_in;
  const Matrix yc = targets.rowwise() - mu_out;
  // Solve xc * B = yc; B is inputs.cols() x targets.cols().
  const Matrix b = xc.colPivHouseholderQr().solve(yc);
  AffineMap map;
  map.weight = b.transpose();
  map.offset = (mu_out - mu_in * b).transpose();
  return map;
}

R2Result r2_affine(const Matrix& z_hat, const Matrix& z) {
  require_dims(z_hat.rows() == z.rows(), "r2_affine: row mismatch");
  R2Result res;
  res.map = fit_affine(z_hat, z);
  const Matrix pred = res.map.apply(z_hat);
  res.per_coordinate.resize(z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    const double sst = (z.col(j).array() - z.col(j).mean()).square().sum();
    if (!(sst > 0.0)) throw std::invalid_argument("r2_affine: true coordinate " + std::to_string(j) + " has zero variance");
    const double sse = (z.col(j) - pred.col(j)).squaredNorm();
    res.per_coordinate(j) = 1.0 - sse / sst;
  }
  res.r2 = res.per_coordinate.mean();
  return res;
}

namespace {

// Hungarian algorithm with potentials; rows <= cols. Returns row -> column.
std::vector<int> hungarian(const Matrix& a) {
  const int n = static_cast<int>(a.rows());
  const int m = static_cast<int>(a.cols());
  const double inf = std::numeric_limits<double>::infinity();
  std::vector<double> u(n + 1, 0.0), v(m + 1, 0.0), minv(m + 1);
  std::vector<int> p(m + 1, 0), way(m + 1, 0);
  std::vector<char> used(m + 1);
  for (int i = 1; i <= n; ++i) {
    p[0] = i;
    int j0 = 0;
    std::fill(minv.begin(), minv.end(), inf);
    std::fill(used.begin(), used.end(), 0);
    do {
      used[j0] = 1;
      const int i0 = p[j0];
      double delta = inf;
      int j1 = 0;
      for (int j = 1; j <= m; ++j) {
        if (used[j]) continue;
        const double cur = a(i0 - 1, j - 1) - u[i0] - v[j];
        if (cur < minv[j]) {
          minv[j] = cur;
          way[j] = j0;
        }
        if (minv[j] < delta) {
          delta = minv[j];
          j1 = j;
        }
      }
      for (int j = 0; j <= m; ++j) {
        if (used[j]) {
          u[p[j]] += delta;
          v[j] -= delta;
        } else {
          minv[j] -= delta;
        }
      }
      j0 = j1;
    } while (p[j0] != 0);
    do {
      const int j1 = way[j0];
      p[j0] = p[j1];
      j0 = j1;
    } while (j0);
  }
  std::vector<int> out(static_cast<std::size_t>(n), -1);
  for (int j = 1; j <= m; ++j)
    if (p[j]) out[static_cast<std::size_t>(p[j] - 1)] = j - 1;
  return out;
}

double optimal_cost(const Matrix& a) {
  if (a.rows() == 0) return 0.0;
  return assignment_cost(a, hungarian(a));
}

}  // namespace

double assignment_cost(const Matrix& cost, const std::vector<int>& assignment) {
  double s = 0.0;
  for (std::size_t i = 0; i < assignment.size(); ++i) s += cost(static_cast<Eigen::Index>(i), assignment[i]);
  return s;
}

std::vector<int> assignment_solve(const Matrix& cost) {
  if (!cost.allFinite()) throw std::invalid_argument("assignment_solve: costs must be finite");
  if (cost.rows() > cost.cols()) {
    // Each column gets a distinct row; report as row -> column with -1 for
    // unassigned rows.
    const auto t = assignment_solve(cost.transpose());
    std::vector<int> out(static_cast<std::size_t>(cost.rows()), -1);
    for (std::size_t j = 0; j < t.size(); ++j) out[static_cast<std::size_t>(t[j])] = static_cast<int>(j);
    return out;
  }
  const int n = static_cast<int>(cost.rows());
  const int m = static_cast<int>(cost.cols());
  if (n == 0) return {};
  const double best = optimal_cost(cost);
  const double tol = 1e-9 * (1.0 + std::abs(best) + cost.cwiseAbs().maxCoeff());

  // Fix rows in order to the smallest column that still admits an optimal
  // completion.
  std::vector<int> out;
  std::vector<char> taken(static_cast<std::size_t>(m), 0);
  double fixed = 0.0;
  for (int i = 0; i < n; ++i) {
    for (int j = 0; j < m; ++j) {
      if (taken[static_cast<std::size_t>(j)]) continue;
      std::vector<int> cols;
      for (int c = 0; c < m; ++c)
        if (!taken[static_cast<std::size_t>(c)] && c != j) cols.push_back(c);
      std::vector<int> rows;
      for (int r = i + 1; r < n; ++r) rows.push_back(r);
      const Matrix rest = cost(rows, cols);
      const double total = fixed + cost(i, j) + optimal_cost(rest);
      if (total <= best + tol) {
        out.push_back(j);
        taken[static_cast<std::size_t>(j)] = 1;
        fixed += cost(i, j);
        break;
      }
    }
    if (static_cast<int>(out.size()) != i + 1) return hungarian(cost);  // numerical fallback
  }
  return out;
}

MccResult mcc_detail(const Matrix& z_hat, const Matrix& z) {
  require_dims(z_hat.rows() == z.rows(), "mcc: row mismatch");
  require_dims(z_hat.cols() >= z.cols(), "mcc: representation narrower than the true latent");
  const Matrix corr = abs_correlation(z, z_hat);  // d x d_hat
  MccResult res;
  res.match = assignment_solve(-corr);
  res.matched_corr.resize(z.cols());
  for (Eigen::Index i = 0; i < z.cols(); ++i) res.matched_corr(i) = corr(i, res.match[static_cast<std::size_t>(i)]);
  res.mcc = 100.0 * res.matched_corr.mean();
  return res;
}

BlockScore block_structure_score(const Matrix& mixing, int k, const std::vector<int>& others, double rel_threshold) {
  if (k < 0 || k >= mixing.rows()) throw std::out_of_range("block_structure_score: row out of range");
  auto support = [&](Eigen::Index row) {
    std::vector<int> s;
    const double mx = mixing.row(row).cwiseAbs().maxCoeff();
    for (Eigen::Index j = 0; j < mixing.cols(); ++j)
      if (mx > 0.0 && std::abs(mixing(row, j)) > rel_threshold * mx) s.push_back(static_cast<int>(j));
    return s;
  };
  BlockScore out;
  out.row_support = support(k);
  for (int m : others) {
    if (m < 0 || m >= mixing.rows() || m == k) throw std::out_of_range("block_structure_score: bad comparison row");
    const auto sm = support(m);
    for (int j : out.row_support)
      if (std::find(sm.begin(), sm.end(), j) != sm.end()) ++out.shared;
    out.possible += static_cast<int>(out.row_support.size());
  }
  out.overlap = out.possible ? static_cast<double>(out.shared) / out.possible : 0.0;
  return out;
}

MeanSe mean_se(const std::vector<double>& values) {
  MeanSe r;
  r.count = static_cast<int>(values.size());
  if (values.empty()) {
    r.mean = r.se = NAN;
    return r;
  }
  r.mean = std::accumulate(values.begin(), values.end(), 0.0) / r.count;
  if (r.count < 2) {
    r.se = NAN;
    return r;
  }
  double ss = 0.0;
  for (double v : values) ss += (v - r.mean) * (v - r.mean);
  r.se = std::sqrt(ss / (r.count - 1)) / std::sqrt(static_cast<double>(r.count));
  return r;
}

}  // namespace crl
