#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "streamtile/gaussian.hpp"

using namespace streamtile;

TEST_CASE("standard normal log density in one and two dimensions") {
  Vector mu1 = Vector::Zero(1);
  Matrix l1 = Matrix::Identity(1, 1);
  REQUIRE(gaussian_log_pdf(mu1, l1, Vector::Zero(1)) ==
          Catch::Approx(-0.5 * std::log(2.0 * M_PI)).epsilon(1e-12));

  Vector mu2(2);
  mu2 << 0.3, -1.2;
  Matrix l2 = Matrix::Identity(2, 2);
  REQUIRE(gaussian_log_pdf(mu2, l2, mu2) ==
          Catch::Approx(-std::log(2.0 * M_PI)).epsilon(1e-12));
}

TEST_CASE("factor form matches the dense covariance evaluation") {
  std::mt19937_64 rng(17);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Index k = 5;
  for (int trial = 0; trial < 20; ++trial) {
    Matrix a(k, k);
    for (Index j = 0; j < k; ++j)
      for (Index i = 0; i < k; ++i) a(i, j) = gauss(rng);
    Matrix sigma = a * a.transpose() + Matrix::Identity(k, k);
    Vector mu(k), x(k);
    for (Index i = 0; i < k; ++i) {
      mu[i] = gauss(rng);
      x[i] = gauss(rng);
    }

    Matrix l = cholesky_of_inverse(sigma);
    const double via_factor = gaussian_log_pdf(mu, l, x);

    // Dense-inverse evaluation, independent of the factor path.
    Matrix inv = sigma.inverse();
    const double quad = (x - mu).dot(inv * (x - mu));
    const double dense = -0.5 * (quad + std::log(sigma.determinant()) +
                                 k * std::log(2.0 * M_PI));
    REQUIRE(via_factor == Catch::Approx(dense).margin(1e-10));
  }
}

TEST_CASE("non-positive factor diagonal is rejected") {
  Vector mu = Vector::Zero(2);
  Matrix l = Matrix::Identity(2, 2);
  l(1, 1) = 0.0;
  REQUIRE_THROWS_AS(gaussian_log_pdf(mu, l, mu), std::invalid_argument);
  l(1, 1) = -0.5;
  REQUIRE_THROWS_AS(gaussian_log_pdf(mu, l, mu), std::invalid_argument);
}

TEST_CASE("cholesky_of_inverse round-trips the covariance") {
  std::mt19937_64 rng(18);
  std::normal_distribution<double> gauss(0.0, 1.0);
  const Index k = 4;
  Matrix a(k, k);
  for (Index j = 0; j < k; ++j)
    for (Index i = 0; i < k; ++i) a(i, j) = gauss(rng);
  Matrix sigma = a * a.transpose() + 0.5 * Matrix::Identity(k, k);
  Matrix l = cholesky_of_inverse(sigma);
  Matrix recon = covariance_from_factor(l);
  REQUIRE((recon - sigma).cwiseAbs().maxCoeff() < 1e-9 * sigma.cwiseAbs().maxCoeff());
  REQUIRE_THROWS_AS(cholesky_of_inverse(Matrix::Zero(3, 3)), numerical_error);
}
