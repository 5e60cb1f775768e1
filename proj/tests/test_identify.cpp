#include <doctest.h>

#include "crl/identify.hpp"
#include "crl/latent_models.hpp"
#include "crl/metrics.hpp"
#include "crl/poly_core.hpp"
#include "oracles.hpp"

using namespace crl;

TEST_CASE("hausdorff batch loss equals the brute-force double loop for m <= 64") {
  Rng rng(0);
  std::normal_distribution<double> nd;
  for (int m : {2, 3, 7, 16, 33, 64})
    for (int d : {2, 3, 5}) {
      const Matrix pts = Matrix::NullaryExpr(m, d, [&] { return nd(rng); });
      const auto pairs = unordered_pairs(d);
      CHECK(hausdorff_support_loss(pts, pairs).value == oracle::hausdorff_brute(pts, pairs));
    }
  CHECK_THROWS(hausdorff_support_loss(Matrix::Zero(1, 2), {{0, 1}}));
}

TEST_CASE("hausdorff loss on ties and duplicates equals brute force") {
  Rng rng(1);
  std::uniform_int_distribution<int> grid(-2, 2);
  for (int t = 0; t < 20; ++t) {
    const Matrix pts = Matrix::NullaryExpr(40, 3, [&] { return static_cast<double>(grid(rng)); });
    const auto pairs = unordered_pairs(3);
    CHECK(hausdorff_support_loss(pts, pairs).value == oracle::hausdorff_brute(pts, pairs));
  }
}

TEST_CASE("hausdorff loss is zero on a product set and positive on a diagonal") {
  Matrix grid(9, 2);
  for (int i = 0; i < 3; ++i)
    for (int j = 0; j < 3; ++j) grid.row(3 * i + j) << i, j;
  CHECK(hausdorff_support_loss(grid, {{0, 1}}).value == 0.0);
  Matrix diag(3, 2);
  diag << 0, 0, 1, 1, 2, 2;
  CHECK(hausdorff_support_loss(diag, {{0, 1}}).value == doctest::Approx(std::sqrt(2.0)));
}

TEST_CASE("hausdorff gradient matches central differences at a generic point") {
  Rng rng(2);
  std::normal_distribution<double> nd;
  Matrix pts = Matrix::NullaryExpr(12, 3, [&] { return nd(rng); });
  const auto pairs = unordered_pairs(3);
  const auto loss = hausdorff_support_loss(pts, pairs);
  for (Eigen::Index i = 0; i < pts.rows(); ++i)
    for (Eigen::Index j = 0; j < pts.cols(); ++j) {
      const double fd = oracle::central_difference(
          pts(i, j), [&] { return hausdorff_support_loss(pts, pairs).value; }, 1e-7);
      CHECK(loss.grad(i, j) == doctest::Approx(fd).epsilon(1e-5));
    }
}

TEST_CASE("unordered pairs") {
  const auto p = unordered_pairs(4);
  CHECK(p.size() == 6);
  CHECK(p.front() == IndexPair{0, 1});
  CHECK(p.back() == IndexPair{2, 3});
}

TEST_CASE("targets live in (0, 1) and depend on the seed") {
  const auto t = draw_targets(5, 3, 1);
  REQUIRE(t.size() == 5);
  for (const auto& row : t) {
    REQUIRE(row.size() == 3);
    for (double v : row) CHECK((v > 0.0 && v < 1.0));
  }
  CHECK(draw_targets(5, 3, 1) == t);
  CHECK(draw_targets(5, 3, 2) != t);
}

TEST_CASE("linear gamma recovers intervened latents from an affine encoding") {
  // z_hat = A z + c. Rows intervened on latent i have z_i fixed, so
  // regressing a constant on them isolates gamma_i proportional to row i of A^-1.
  Rng rng(3);
  std::uniform_real_distribution<double> u(-5, 5);
  std::normal_distribution<double> nd;
  const int d = 4;
  const Matrix a = Matrix::NullaryExpr(d, d, [&] { return nd(rng); });
  const RowVector c = RowVector::NullaryExpr(d, [&] { return nd(rng); });
  const auto model = LatentModel::uniform(d);
  EncodedInterventions enc(d);
  for (int i = 0; i < d; ++i) {
    const auto s = sample_interventional(model, InterventionSpec::do_single(i, 2.0), 300, 10 + static_cast<unsigned>(i));
    enc[static_cast<std::size_t>(i)].push_back((s.z * a.transpose()).rowwise() + c);
  }
  const auto fit = fit_linear_gamma(enc, draw_targets(d, 1, 0));
  CHECK(fit.regularized.empty());
  const Matrix z = sample_observational(model, 2000, 1);
  const Matrix rep = fit.apply((z * a.transpose()).rowwise() + c);
  CHECK(mcc(rep, z) > 99.9);
}

TEST_CASE("rank-deficient design falls back to the ridge") {
  EncodedInterventions enc(1);
  enc[0].push_back(Matrix::Ones(10, 2));  // identical columns
  const auto fit = fit_linear_gamma(enc, {{0.5}});
  CHECK(fit.regularized == std::vector<int>{0});
  CHECK(fit.gamma.allFinite());
}

TEST_CASE("ios unmixes a linear mixture of uniform latents") {
  Rng rng(4);
  std::normal_distribution<double> nd;
  const Matrix z = sample_observational(LatentModel::uniform(3), 3000, 2);
  const Matrix a = Matrix::NullaryExpr(3, 3, [&] { return nd(rng); });
  const Matrix zh = z * a.transpose();
  IosHyper hp;
  hp.epochs = 40;
  hp.seed = 1;
  const auto g = fit_ios_gamma(zh, hp);
  CHECK_FALSE(g.singular);
  CHECK(mcc(g.apply(zh), z) > 95.0);
  CHECK(mcc(zh, z) < 90.0);
}

TEST_CASE("ios restarts keep the lowest final loss") {
  Rng rng(5);
  std::normal_distribution<double> nd;
  const Matrix z = sample_observational(LatentModel::uniform(3), 600, 3);
  const Matrix zh = z * Matrix::NullaryExpr(3, 3, [&] { return nd(rng); }).transpose();
  IosHyper hp;
  hp.epochs = 5;
  hp.seed = 2;
  hp.restarts = 1;
  const auto one = fit_ios_gamma(zh, hp);
  hp.restarts = 3;
  const auto three = fit_ios_gamma(zh, hp);
  CHECK(three.loss.back() <= one.loss.back());
  for (Eigen::Index k = 0; k < 3; ++k) CHECK(three.gamma.row(k).norm() == doctest::Approx(1.0));
  hp.restarts = 0;
  CHECK_THROWS(fit_ios_gamma(zh, hp));
}

TEST_CASE("degree selection on a linear decoder walks down to 1") {
  const auto lm = LatentModel::uniform(2);
  Rng rng(3);
  const auto g = PolyDecoder::random(2, 1, 6, rng);
  const Matrix xt = g.decode(sample_observational(lm, 1000, 4));
  const Matrix xv = g.decode(sample_observational(lm, 200, 5));
  nets::TrainHyper hp;
  hp.epochs = 20;
  hp.seed = 1;
  const auto sel = degree_selection(xt, xv, 2, 3, hp, 0.01, 2);
  CHECK(sel.degree == 1);
  REQUIRE(sel.trials.size() == 3);
  CHECK(sel.trials[0].degree == 3);
  CHECK(sel.trials[2].degree == 1);
  CHECK(sel.trials[2].passed);
  CHECK_THROWS(degree_selection(xt, xv, 2, 0, hp));
  CHECK_THROWS(degree_selection(xt, xv, 2, 3, hp, 0.01, 0));
}
