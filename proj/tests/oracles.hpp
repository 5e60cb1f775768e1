#pragma once

// Slow, obviously correct reference implementations. Shared by the unit
// tests and the acceptance binary; nothing in src/ uses them.

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numeric>
#include <vector>

#include "crl/types.hpp"

namespace oracle {

using crl::Matrix;

// Sum over pairs of max over product points of min over joint points, with
// a plain double loop per pair.
inline double hausdorff_brute(const Matrix& pts, const std::vector<std::pair<int, int>>& pairs) {
  const auto m = pts.rows();
  double total = 0.0;
  for (auto [k, l] : pairs) {
    double worst = 0.0;
    for (Eigen::Index a = 0; a < m; ++a)
      for (Eigen::Index b = 0; b < m; ++b) {
        double near = std::numeric_limits<double>::infinity();
        for (Eigen::Index j = 0; j < m; ++j) {
          const double dx = pts(a, k) - pts(j, k), dy = pts(b, l) - pts(j, l);
          near = std::min(near, std::sqrt(dx * dx + dy * dy));
        }
        worst = std::max(worst, near);
      }
    total += worst;
  }
  return total;
}

// Minimum assignment cost over every permutation (rows <= cols is not
// needed here: square only).
inline double assignment_brute(const Matrix& cost) {
  std::vector<int> perm(static_cast<std::size_t>(cost.rows()));
  std::iota(perm.begin(), perm.end(), 0);
  double best = std::numeric_limits<double>::infinity();
  do {
    double c = 0.0;
    for (std::size_t i = 0; i < perm.size(); ++i) c += cost(static_cast<Eigen::Index>(i), perm[i]);
    best = std::min(best, c);
  } while (std::next_permutation(perm.begin(), perm.end()));
  return best;
}

// Central difference of f at value[i].
inline double central_difference(double& value, const std::function<double()>& f, double h = 1e-6) {
  const double keep = value;
  value = keep + h;
  const double up = f();
  value = keep - h;
  const double down = f();
  value = keep;
  return (up - down) / (2.0 * h);
}

// One-sample Kolmogorov-Smirnov statistic against a continuous cdf.
inline double ks_statistic(std::vector<double> xs, const std::function<double(double)>& cdf) {
  std::sort(xs.begin(), xs.end());
  const double n = static_cast<double>(xs.size());
  double d = 0.0;
  for (std::size_t i = 0; i < xs.size(); ++i) {
    const double f = cdf(xs[i]);
    d = std::max({d, (static_cast<double>(i) + 1.0) / n - f, f - static_cast<double>(i) / n});
  }
  return d;
}

// Binomial coefficient by the multiplicative formula.
inline std::size_t choose(int n, int k) {
  std::size_t r = 1;
  for (int i = 1; i <= k; ++i) r = r * static_cast<std::size_t>(n - k + i) / static_cast<std::size_t>(i);
  return r;
}

}  // namespace oracle
