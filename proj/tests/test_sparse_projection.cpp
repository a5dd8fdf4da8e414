#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "streamtile/sparse_projection.hpp"

using namespace streamtile;

TEST_CASE("projection is a deterministic function of its parameters") {
  SparseProjection a(100, 20, 7, DensityMode::achlioptas);
  SparseProjection b(100, 20, 7, DensityMode::achlioptas);
  REQUIRE(a.nonzeros() == b.nonzeros());
  Matrix da = a.matrix();
  Matrix db = b.matrix();
  REQUIRE((da - db).cwiseAbs().maxCoeff() == 0.0);

  SparseProjection c(100, 20, 8, DensityMode::achlioptas);
  REQUIRE((Matrix(c.matrix()) - da).cwiseAbs().maxCoeff() > 0.0);
}

TEST_CASE("achlioptas nonzero fraction stays within binomial bounds") {
  const Index d = 1000, n = 50;
  SparseProjection p(d, n, 123, DensityMode::achlioptas);
  const double total = static_cast<double>(d * n);
  const double frac = static_cast<double>(p.nonzeros()) / total;
  const double sigma = std::sqrt((1.0 / 3.0) * (2.0 / 3.0) / total);
  REQUIRE(frac > 1.0 / 3.0 - 3.0 * sigma);
  REQUIRE(frac < 1.0 / 3.0 + 3.0 * sigma);
}

TEST_CASE("very-sparse mode uses 1/sqrt(d) density") {
  const Index d = 4096, n = 64;
  SparseProjection p(d, n, 5, DensityMode::very_sparse);
  const double expected = 1.0 / std::sqrt(static_cast<double>(d));
  const double total = static_cast<double>(d * n);
  const double frac = static_cast<double>(p.nonzeros()) / total;
  const double sigma = std::sqrt(expected * (1.0 - expected) / total);
  REQUIRE(frac > expected - 4.0 * sigma);
  REQUIRE(frac < expected + 4.0 * sigma);
}

TEST_CASE("projection preserves squared norm in expectation") {
  const Index d = 1000, n = 50;
  std::mt19937_64 rng(99);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector x(d);
  for (Index i = 0; i < d; ++i) x[i] = gauss(rng);
  x /= x.norm();

  const int seeds = 10000;
  double mean = 0.0;
  for (int s = 0; s < seeds; ++s) {
    SparseProjection p(d, n, static_cast<std::uint64_t>(s), DensityMode::achlioptas);
    mean += p.apply(x).squaredNorm();
  }
  mean /= seeds;
  REQUIRE(mean == Catch::Approx(1.0).margin(0.02));
}

TEST_CASE("projection of zero is zero and the map is linear") {
  SparseProjection p(200, 40, 11, DensityMode::achlioptas);
  REQUIRE(p.apply(Vector::Zero(200)).cwiseAbs().maxCoeff() == 0.0);

  std::mt19937_64 rng(4);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix x(200, 3), y(200, 3);
  for (Index j = 0; j < 3; ++j)
    for (Index i = 0; i < 200; ++i) {
      x(i, j) = gauss(rng);
      y(i, j) = gauss(rng);
    }
  const double a = 1.7, b = -0.4;
  Matrix lhs = p.apply(Matrix(a * x + b * y));
  Matrix rhs = a * p.apply(x) + b * p.apply(y);
  REQUIRE((lhs - rhs).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("pairwise distance distortion is controlled at moderate scale") {
  // Reduced-size counterpart of the acceptance check.
  const Index d = 2000, n = 200;
  SparseProjection p(d, n, 21, DensityMode::achlioptas);
  std::mt19937_64 rng(22);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const int points = 30;
  Matrix x(d, points);
  for (Index j = 0; j < points; ++j)
    for (Index i = 0; i < d; ++i) x(i, j) = gauss(rng);
  Matrix y = p.apply(x);

  std::vector<double> distortions;
  for (int a = 0; a < points; ++a)
    for (int b = a + 1; b < points; ++b) {
      const double orig = (x.col(a) - x.col(b)).squaredNorm();
      const double red = (y.col(a) - y.col(b)).squaredNorm();
      distortions.push_back(std::abs(red / orig - 1.0));
    }
  std::sort(distortions.begin(), distortions.end());
  REQUIRE(distortions.back() < 0.5);
  REQUIRE(distortions[distortions.size() / 2] < 0.2);
}

TEST_CASE("projection rejects invalid shapes and sizes") {
  REQUIRE_THROWS_AS(SparseProjection(10, 20, 0, DensityMode::achlioptas),
                    std::invalid_argument);
  REQUIRE_THROWS_AS(SparseProjection(10, 0, 0, DensityMode::achlioptas),
                    std::invalid_argument);
  SparseProjection p(50, 10, 1, DensityMode::achlioptas);
  REQUIRE_THROWS_AS(p.apply(Vector::Zero(49)), shape_error);
  REQUIRE_THROWS_AS(p.apply(Matrix::Zero(51, 2)), shape_error);
}

TEST_CASE("very-sparse mode also preserves squared norms in expectation") {
  const Index d = 1024, n = 64;
  std::mt19937_64 rng(55);
  std::normal_distribution<double> gauss(0.0, 1.0);
  Vector x(d);
  for (Index i = 0; i < d; ++i) x[i] = gauss(rng);
  x /= x.norm();

  const int seeds = 4000;
  double mean = 0.0;
  for (int s = 0; s < seeds; ++s) {
    SparseProjection p(d, n, 7000 + static_cast<std::uint64_t>(s),
                       DensityMode::very_sparse);
    mean += p.apply(x).squaredNorm();
  }
  mean /= seeds;
  REQUIRE(mean == Catch::Approx(1.0).margin(0.05));
}
