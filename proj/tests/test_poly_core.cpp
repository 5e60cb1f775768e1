#include <doctest.h>

#include <set>

#include "crl/poly_core.hpp"
#include "oracles.hpp"

using namespace crl;

TEST_CASE("monomial counts match C(p + d, d)") {
  for (int d = 1; d <= 6; ++d)
    for (int p = 0; p <= 4; ++p) {
      CHECK(monomial_count(d, p) == oracle::choose(p + d, d));
      CHECK(MonomialBasis(d, p).size() == static_cast<Eigen::Index>(oracle::choose(p + d, d)));
    }
  CHECK_THROWS_AS(monomial_count(50, 10, 1000), std::length_error);
}

TEST_CASE("basis is graded and has no repeats") {
  const MonomialBasis b(3, 3);
  std::set<std::vector<int>> seen;
  int last = 0;
  for (Eigen::Index j = 0; j < b.size(); ++j) {
    CHECK(seen.insert(b.exponent(j)).second);
    CHECK(b.total_degree(j) >= last);
    last = b.total_degree(j);
    CHECK(b.index_of(b.exponent(j)) == j);
  }
  CHECK(b.exponent(0) == std::vector<int>{0, 0, 0});
}

TEST_CASE("featurize equals explicit products") {
  const MonomialBasis b(3, 3);
  Matrix z(2, 3);
  z << 0.5, -1.5, 2.0, 1.1, 0.3, -0.7;
  const Matrix phi = b.featurize(z);
  for (Eigen::Index r = 0; r < 2; ++r)
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      double want = 1.0;
      for (int v = 0; v < 3; ++v) want *= std::pow(z(r, v), b.exponent(j)[static_cast<std::size_t>(v)]);
      CHECK(phi(r, j) == doctest::Approx(want).epsilon(1e-14));
    }
}

TEST_CASE("featurize_backward matches finite differences") {
  const MonomialBasis b(2, 4);
  Rng rng(3);
  std::normal_distribution<double> nd;
  Matrix z = Matrix::NullaryExpr(3, 2, [&] { return nd(rng); });
  const Matrix w = Matrix::NullaryExpr(3, b.size(), [&] { return nd(rng); });
  const Matrix grad = b.featurize_backward(b.featurize(z), w);
  for (Eigen::Index r = 0; r < 3; ++r)
    for (Eigen::Index c = 0; c < 2; ++c) {
      const double fd = oracle::central_difference(z(r, c), [&] { return b.featurize(z).cwiseProduct(w).sum(); });
      CHECK(grad(r, c) == doctest::Approx(fd).epsilon(1e-6));
    }
}

TEST_CASE("linear decoder keeps the degree-one block") {
  const MonomialBasis b(3, 1);
  Matrix g = Matrix::Zero(3, b.size());
  g.rightCols(3) = Matrix::Identity(3, 3);
  const PolyDecoder dec(b, g);
  Matrix z(1, 3);
  z << 1, 2, 3;
  CHECK(dec.decode(z).isApprox(z));
}

TEST_CASE("decoder serialization round trips, including the sparse mask") {
  Rng rng(5);
  const auto dense = PolyDecoder::random(3, 2, 12, rng);
  CHECK(PolyDecoder::deserialize(dense.serialize()) == dense);
  const auto sparse = PolyDecoder::random_sparse(3, 3, 25, 0.3, rng);
  const auto back = PolyDecoder::deserialize(sparse.serialize());
  CHECK(back == sparse);
  REQUIRE(back.active().has_value());
}

TEST_CASE("sparse variant keeps the degree-one block and a high pure power per latent") {
  Rng rng(9);
  const auto dec = PolyDecoder::random_sparse(4, 3, 40, 0.0, rng);
  const auto& mask = *dec.active();
  const auto& b = dec.basis();
  for (Eigen::Index j = 0; j < b.size(); ++j)
    if (b.total_degree(j) <= 1) CHECK(mask[static_cast<std::size_t>(j)]);
  for (int i = 0; i < 4; ++i) {
    bool found = false;
    for (Eigen::Index j = 0; j < b.size(); ++j) {
      const auto& e = b.exponent(j);
      const bool pure = e[static_cast<std::size_t>(i)] == b.total_degree(j);
      if (mask[static_cast<std::size_t>(j)] && pure && e[static_cast<std::size_t>(i)] >= 2) found = true;
    }
    CHECK(found);
  }
}

TEST_CASE("injectivity: full column rank iff n >= q for random G") {
  Rng rng(1);
  const auto q = static_cast<int>(monomial_count(3, 2));
  CHECK(check_injectivity(PolyDecoder::random(3, 2, q, rng)).full_rank);
  CHECK_FALSE(check_injectivity(PolyDecoder::random(3, 2, q - 1, rng)).full_rank);
}

TEST_CASE("product degree equals the sum of degrees on 200 random pairs") {
  Rng rng(17);
  std::uniform_int_distribution<int> vars(1, 4), terms(1, 5), power(0, 4);
  std::normal_distribution<double> coef;
  for (int k = 0; k < 200; ++k) {
    const int v = vars(rng);
    auto draw = [&] {
      SparsePolynomial p(v);
      while (p.empty()) {
        const int t = terms(rng);
        for (int i = 0; i < t; ++i) {
          std::vector<int> e(static_cast<std::size_t>(v));
          for (auto& x : e) x = power(rng);
          p.add_term(e, coef(rng));
        }
      }
      return p;
    };
    const auto a = draw(), b = draw();
    int da = 0, db = 0;  // degrees read off the terms directly
    for (const auto& [e, c] : a.terms()) da = std::max(da, std::accumulate(e.begin(), e.end(), 0));
    for (const auto& [e, c] : b.terms()) db = std::max(db, std::accumulate(e.begin(), e.end(), 0));
    CHECK(symbolic_product_degree(a, b) == da + db);
  }
}

TEST_CASE("zero polynomial has no degree") {
  SparsePolynomial p(2);
  CHECK_THROWS(p.degree());
}
