#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace streamtile {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using Index = Eigen::Index;

// Error taxonomy. Shape/argument problems are programmer errors and use the
// std::invalid_argument family; the rest are runtime conditions.
struct shape_error : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};
struct data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct numerical_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct format_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct insufficient_data_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct rank_deficient_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct integration_diverged_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

inline void require_shape(bool cond, const char* msg) {
  if (!cond) throw shape_error(msg);
}

inline void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) throw data_error(std::string(what) + ": non-finite values");
}

constexpr double kLog2Pi = 1.8378770664093454836;  // log(2*pi)

// log(sum_i exp(v_i)) with the usual max shift. Empty or all -inf gives -inf.
inline double log_sum_exp(const Vector& v) {
  if (v.size() == 0) return -std::numeric_limits<double>::infinity();
  const double m = v.maxCoeff();
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (Index i = 0; i < v.size(); ++i) s += std::exp(v[i] - m);
  return m + std::log(s);
}

// QR with the R diagonal forced positive, so the factorization is unique and
// deterministic across implementations. Returns thin Q (cols = min(m, n)).
inline void qr_positive(const Matrix& x, Matrix& q, Matrix& r) {
  Eigen::HouseholderQR<Matrix> qr(x);
  const Index m = x.rows(), n = x.cols(), p = std::min(m, n);
  q = qr.householderQ() * Matrix::Identity(m, p);
  r = qr.matrixQR().topRows(p).triangularView<Eigen::Upper>();
  for (Index i = 0; i < p; ++i) {
    if (r(i, i) < 0.0) {
      r.row(i) = -r.row(i);
      q.col(i) = -q.col(i);
    }
  }
}

// Symmetrize and clamp negative eigenvalues to zero.
inline Matrix eigen_floor_psd(const Matrix& m) {
  Matrix s = 0.5 * (m + m.transpose());
  Eigen::SelfAdjointEigenSolver<Matrix> es(s);
  Vector ev = es.eigenvalues().cwiseMax(0.0);
  return es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
}

// Diagonal jitter scaled to the matrix trace; falls back to an absolute
// floor when the trace carries no scale (degenerate input).
inline void add_jitter(Matrix& m, double rel = 1e-6) {
  const double scale = m.trace() / static_cast<double>(m.rows());
  const double jit = rel * (scale > 0.0 ? scale : 1.0);
  m.diagonal().array() += jit;
}

// Haar-ish random orthogonal matrix: QR of a Gaussian draw, sign-fixed.
inline Matrix random_orthogonal(Index n, std::mt19937_64& rng) {
  std::normal_distribution<double> gauss(0.0, 1.0);
  Matrix g(n, n);
  for (Index j = 0; j < n; ++j)
    for (Index i = 0; i < n; ++i) g(i, j) = gauss(rng);
  Matrix q, r;
  qr_positive(g, q, r);
  return q;
}

// Largest principal angle (in sin form) between span(a) and span(b); both
// must have orthonormal columns. sin(theta_max) is measurable down to
// machine precision where acos saturates.
inline double max_principal_angle_sin(const Matrix& a, const Matrix& b) {
  Matrix residual = b - a * (a.transpose() * b);
  Eigen::JacobiSVD<Matrix> svd(residual);
  return svd.singularValues()(0);
}

}  // namespace streamtile
