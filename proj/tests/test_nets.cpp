#include <doctest.h>

#include <filesystem>

#include "crl/nets.hpp"
#include "oracles.hpp"

using namespace crl;
using namespace crl::nets;

namespace {
Matrix randn(Eigen::Index r, Eigen::Index c, Rng& rng) {
  std::normal_distribution<double> nd;
  return Matrix::NullaryExpr(r, c, [&] { return nd(rng); });
}
double rel_err(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8}); }
}  // namespace

TEST_CASE("leaky relu uses the configured slope") {
  Rng rng(0);
  Mlp net({1, 1, 1}, rng);
  net.weight(0)(0, 0) = 1.0;
  net.weight(1)(0, 0) = 1.0;
  Matrix x(2, 1);
  x << -2.0, 3.0;
  const Matrix y = net.predict(x);
  CHECK(y(0, 0) == doctest::Approx(-2.0 * kLeakySlope));
  CHECK(y(1, 0) == doctest::Approx(3.0));
}

TEST_CASE("mlp gradients match central differences") {
  Rng rng(1);
  Mlp net({4, 7, 5, 3}, rng);
  Matrix x = randn(6, 4, rng);
  const Matrix w = randn(6, 3, rng);
  net.forward(x);
  const Matrix gx = net.backward(w);
  auto loss = [&] { return net.predict(x).cwiseProduct(w).sum(); };
  for (std::size_t l = 0; l < net.num_layers(); ++l) {
    const Matrix gw = net.weight_grad(l);
    for (Eigen::Index i = 0; i < gw.rows(); ++i)
      for (Eigen::Index j = 0; j < gw.cols(); ++j)
        CHECK(rel_err(gw(i, j), oracle::central_difference(net.weight(l)(i, j), loss)) < 1e-4);
    const RowVector gb = net.bias_grad(l);
    for (Eigen::Index j = 0; j < gb.size(); ++j)
      CHECK(rel_err(gb(j), oracle::central_difference(net.bias(l)(j), loss)) < 1e-4);
  }
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j)
      CHECK(rel_err(gx(i, j), oracle::central_difference(x(i, j), loss)) < 1e-4);
}

TEST_CASE("polynomial head gradients match central differences") {
  Rng rng(2);
  PolyDecoderHead head(3, 3, 5, rng);
  Matrix z = randn(4, 3, rng);
  const Matrix w = randn(4, 5, rng);
  head.forward(z);
  const Matrix gz = head.backward(w);
  auto loss = [&] { return head.predict(z).cwiseProduct(w).sum(); };
  const Matrix gh = head.coefficient_grad();
  for (Eigen::Index i = 0; i < gh.rows(); ++i)
    for (Eigen::Index j = 0; j < gh.cols(); ++j)
      CHECK(rel_err(gh(i, j), oracle::central_difference(head.coefficients()(i, j), loss)) < 1e-4);
  for (Eigen::Index i = 0; i < z.rows(); ++i)
    for (Eigen::Index j = 0; j < z.cols(); ++j)
      CHECK(rel_err(gz(i, j), oracle::central_difference(z(i, j), loss)) < 1e-4);
}

TEST_CASE("adam minimizes a convex quadratic") {
  // f(p) = 0.5 (p - c)^T A (p - c), A positive definite
  Matrix a(3, 3);
  a << 3, 1, 0, 1, 2, 0.5, 0, 0.5, 1;
  Vector c(3);
  c << 1, -2, 0.5;
  Vector p = Vector::Zero(3);
  Vector g(3);
  Adam opt(0.05);
  for (int t = 0; t < 3000; ++t) {
    g = a * (p - c);
    const ParamView v{p.data(), g.data(), 3};
    opt.step(std::span<const ParamView>(&v, 1));
  }
  CHECK((p - c).norm() < 1e-3);
  CHECK(opt.steps() == 3000);
}

TEST_CASE("adam first step has magnitude lr per coordinate") {
  Vector p = Vector::Zero(2), g(2);
  g << 10.0, -0.001;
  Adam opt(0.1);
  const ParamView v{p.data(), g.data(), 2};
  opt.step(std::span<const ParamView>(&v, 1));
  CHECK(p(0) == doctest::Approx(-0.1).epsilon(1e-6));
  CHECK(p(1) == doctest::Approx(0.1).epsilon(1e-4));
}

TEST_CASE("whitening: identity covariance and exact inverse") {
  Rng rng(4);
  const Matrix mix = randn(3, 3, rng);
  const Matrix x = randn(2000, 3, rng) * mix;
  const auto w = fit_whitening(x, 0.0);
  const Matrix y = w.apply(x);
  const Matrix cov = y.transpose() * y / static_cast<double>(y.rows());
  CHECK(cov.isApprox(Matrix::Identity(3, 3), 1e-6));
  CHECK(w.invert(y).isApprox(x, 1e-10));
  CHECK(InputMap{}.apply(x) == x);
}

TEST_CASE("training reduces reconstruction error on a linear problem") {
  Rng rng(5);
  const Matrix z = randn(600, 2, rng);
  const Matrix x = z * randn(2, 8, rng);
  Autoencoder model{Mlp::encoder(8, 2, rng, 16), PolyDecoderHead(2, 1, 8, rng), {}};
  TrainHyper hp;
  hp.epochs = 30;
  hp.batch_size = 32;
  hp.weight_decay = 0.0;
  const auto res = train_autoencoder(model, x.topRows(500), x.bottomRows(100), hp);
  CHECK(res.best_val < 0.05 * res.initial_val);
  CHECK(mse(res.model.reconstruct(x.bottomRows(100)), x.bottomRows(100)) < 0.05 * x.squaredNorm() / x.size());
}

TEST_CASE("checkpoint round trip keeps predictions and the input map") {
  Rng rng(6);
  const Matrix x = randn(50, 6, rng);
  Autoencoder model{Mlp::encoder(6, 2, rng, 8), PolyDecoderHead(2, 2, 6, rng), fit_whitening(x)};
  TrainHyper hp;
  hp.lr = 5e-4;
  const auto path = std::filesystem::temp_directory_path() / "crl_test_ckpt.bin";
  save_checkpoint(path, model, hp, rng);
  TrainHyper back_hp;
  Rng back_rng;
  const auto back = load_checkpoint(path, &back_hp, &back_rng);
  CHECK(back.reconstruct(x) == model.reconstruct(x));
  CHECK(back_hp.lr == hp.lr);
  CHECK(back_rng == rng);
  std::filesystem::remove(path);
}

TEST_CASE("regressor fits a smooth 1-d map") {
  Rng rng(7);
  Matrix x = Matrix::NullaryExpr(400, 1, [&] { return std::uniform_real_distribution<double>(-1, 1)(rng); });
  const Matrix y = x.array().square().matrix();
  RegressorHyper hp;
  hp.hidden = {32};
  hp.lr = 1e-2;
  const auto fit = fit_regressor(x, y, hp);
  CHECK(mse(fit.net.predict(x), y) < 0.01);
}
