#pragma once

#include <Eigen/Dense>

#include "streamtile/core.hpp"

namespace streamtile {

// Log density of N(mu, Sigma) at x, with the precision given through its
// Cholesky factor: Sigma^{-1} = L L^T, L lower triangular, diag(L) > 0.
//
//   log N(x; mu, Sigma) = -(k/2) log 2pi + sum_i log L_ii - 0.5 ||L^T (x - mu)||^2
inline double gaussian_log_pdf(const Vector& mu, const Matrix& chol_precision,
                               const Vector& x) {
  const Index k = mu.size();
  require_shape(x.size() == k, "gaussian_log_pdf: dimension mismatch");
  require_shape(chol_precision.rows() == k && chol_precision.cols() == k,
                "gaussian_log_pdf: factor shape mismatch");
  double log_det_half = 0.0;
  for (Index i = 0; i < k; ++i) {
    const double lii = chol_precision(i, i);
    require(lii > 0.0, "gaussian_log_pdf: factor diagonal must be positive");
    log_det_half += std::log(lii);
  }
  const Vector y = chol_precision.transpose().triangularView<Eigen::Upper>() * (x - mu);
  return -0.5 * k * kLog2Pi + log_det_half - 0.5 * y.squaredNorm();
}

// Same quantity without the diagonal checks, for hot loops that already
// guarantee the invariant.
inline double gaussian_log_pdf_unchecked(const Vector& mu, const Matrix& chol_precision,
                                         const Vector& x, Vector& scratch) {
  const Index k = mu.size();
  double log_det_half = 0.0;
  for (Index i = 0; i < k; ++i) log_det_half += std::log(chol_precision(i, i));
  scratch.noalias() =
      chol_precision.transpose().triangularView<Eigen::Upper>() * (x - mu);
  return -0.5 * k * kLog2Pi + log_det_half - 0.5 * scratch.squaredNorm();
}

// Cholesky factor of the inverse of an SPD matrix: returns lower-triangular L
// with sigma^{-1} = L L^T. Throws numerical_error if sigma is not SPD.
inline Matrix cholesky_of_inverse(const Matrix& sigma) {
  Eigen::LLT<Matrix> llt(sigma);
  if (llt.info() != Eigen::Success)
    throw numerical_error("cholesky_of_inverse: matrix not positive definite");
  const Index k = sigma.rows();
  Matrix inv = llt.solve(Matrix::Identity(k, k));
  inv = 0.5 * (inv + inv.transpose());
  Eigen::LLT<Matrix> llt_inv(inv);
  if (llt_inv.info() != Eigen::Success)
    throw numerical_error("cholesky_of_inverse: inverse not positive definite");
  return llt_inv.matrixL();
}

// Covariance implied by a precision factor: Sigma = (L L^T)^{-1}.
inline Matrix covariance_from_factor(const Matrix& chol_precision) {
  const Index k = chol_precision.rows();
  Matrix identity = Matrix::Identity(k, k);
  Matrix linv = chol_precision.triangularView<Eigen::Lower>().solve(identity);
  return linv.transpose() * linv;
}

}  // namespace streamtile
