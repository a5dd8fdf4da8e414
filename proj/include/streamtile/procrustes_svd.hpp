#pragma once

#include <Eigen/Dense>

#include "streamtile/core.hpp"

namespace streamtile {

// Basis selection for the tracked subspace. `procrustes` rotates each new
// basis to minimize ||Q_t - Q_{t-1}||_F over orthogonal rotations, which
// keeps the embedding stable while the singular vectors themselves wander.
// `raw` keeps the plain singular-vector basis and exists for comparison.
enum class BasisMode { procrustes, raw };

struct SvdOptions {
  double decay = 1.0;
  BasisMode mode = BasisMode::procrustes;
};

// Streaming truncated SVD with an incrementally maintained left basis.
//
// State is the factor pair (Q, R): Q is n x k with orthonormal columns
// spanning the tracked top-k left singular subspace, R is the k x k inner
// block whose singular values are the (discounted) top-k singular values of
// the data seen so far. A decay in (0, 1] down-weights old data each batch.
class ProcrustesSvd {
 public:
  using Options = SvdOptions;

  // Initialize from an n x l block with l >= k; QR-factorize and truncate.
  ProcrustesSvd(const Matrix& x0, Index k, SvdOptions opts = SvdOptions())
      : k_(k), decay_(opts.decay), mode_(opts.mode) {
    require(k >= 1, "ProcrustesSvd: k must be positive");
    require(x0.cols() >= k, "ProcrustesSvd: init block needs at least k columns");
    require(opts.decay > 0.0 && opts.decay <= 1.0, "ProcrustesSvd: decay must be in (0,1]");
    require_finite(x0, "ProcrustesSvd init");

    Matrix q, r;
    qr_positive(x0, q, r);
    const double diag_max = r.diagonal().cwiseAbs().maxCoeff();
    for (Index i = 0; i < k; ++i) {
      if (r(i, i) < 1e-12 * diag_max)
        throw rank_deficient_error("ProcrustesSvd: initial block is rank deficient");
    }
    q_ = q.leftCols(k);
    r_ = r.topLeftCorner(k, k);
    samples_seen_ = x0.cols();
  }

  Index dim() const { return q_.rows(); }
  Index rank() const { return k_; }
  double decay() const { return decay_; }
  BasisMode mode() const { return mode_; }
  void set_mode(BasisMode m) { mode_ = m; }
  Index samples_seen() const { return samples_seen_; }
  const Matrix& basis() const { return q_; }
  const Matrix& inner_block() const { return r_; }

  // Tracked (discounted) singular values, descending.
  Vector singular_values() const {
    Eigen::JacobiSVD<Matrix> svd(r_);
    return svd.singularValues();
  }

  // Fold an n x b batch of new columns into the factorization.
  void update(const Matrix& x_new) {
    require_shape(x_new.rows() == q_.rows(), "ProcrustesSvd::update: row count mismatch");
    require(x_new.cols() >= 1, "ProcrustesSvd::update: empty batch");
    require_finite(x_new, "ProcrustesSvd update");

    const Index b = x_new.cols();

    // Gram-Schmidt against the current basis; a second pass keeps the
    // complement orthogonal to Q at machine precision over long streams.
    Matrix coeff = q_.transpose() * x_new;
    Matrix residual = x_new - q_ * coeff;
    Matrix coeff2 = q_.transpose() * residual;
    residual -= q_ * coeff2;
    coeff += coeff2;

    Matrix q_perp, r_perp;
    qr_positive(residual, q_perp, r_perp);
    // A batch lying inside span(Q) leaves the complement degenerate; floor
    // the diagonal so the augmented SVD stays well defined.
    for (Index i = 0; i < r_perp.rows(); ++i) {
      if (std::abs(r_perp(i, i)) < 1e-14) r_perp(i, i) = 1e-14;
    }

    // Augmented inner block [[R, C], [0, R_perp]] of size (k+b) x (k+b).
    Matrix r_aug = Matrix::Zero(k_ + b, k_ + b);
    r_aug.topLeftCorner(k_, k_) = r_;
    r_aug.topRightCorner(k_, b) = coeff;
    r_aug.bottomRightCorner(b, b) = r_perp;

    Eigen::JacobiSVD<Matrix> svd(r_aug, Eigen::ComputeFullU | Eigen::ComputeFullV);
    if (svd.info() != Eigen::Success)
      throw numerical_error("ProcrustesSvd::update: SVD did not converge");
    Vector sigma = decay_ * svd.singularValues();

    const Matrix u1 = svd.matrixU().leftCols(k_);
    const Matrix v1 = svd.matrixV().leftCols(k_);

    Matrix rotation = Matrix::Identity(k_, k_);
    if (mode_ == BasisMode::procrustes) {
      // min_T ||Qhat U1 T' - Q_{t-1}||_F. Since Qhat = [Q, Q_perp], the
      // Procrustes target Q_{t-1}' Qhat U1 is just the top k x k block of U1.
      Eigen::JacobiSVD<Matrix> align(u1.topRows(k_),
                                     Eigen::ComputeFullU | Eigen::ComputeFullV);
      if (align.info() != Eigen::Success)
        throw numerical_error("ProcrustesSvd::update: alignment SVD did not converge");
      rotation = align.matrixU() * align.matrixV().transpose();
    }

    // Q_t = Qhat U1 T', assembled without materializing Qhat.
    Matrix u1_rot = u1 * rotation.transpose();
    q_ = q_ * u1_rot.topRows(k_) + q_perp * u1_rot.bottomRows(b);

    // Inner block: with V1 = Q_v R_v (positive-diagonal QR), R_t = T S1 R_v'
    // is k x k and keeps the singular values of R equal to the tracked ones.
    Matrix q_v, r_v;
    qr_positive(v1, q_v, r_v);
    r_ = rotation * sigma.head(k_).asDiagonal() * r_v.transpose();

    samples_seen_ += b;
    maybe_reorthonormalize();
  }

  // Q^T x: embed vectors (or column blocks) into the tracked subspace.
  template <class Derived>
  Matrix project(const Eigen::MatrixBase<Derived>& x) const {
    require_shape(x.rows() == q_.rows(), "ProcrustesSvd::project: row count mismatch");
    return q_.transpose() * x;
  }

  Vector project(const Vector& x) const {
    require_shape(x.size() == q_.rows(), "ProcrustesSvd::project: dimension mismatch");
    return q_.transpose() * x;
  }

  double orthonormality_error() const {
    return (q_.transpose() * q_ - Matrix::Identity(k_, k_)).cwiseAbs().maxCoeff();
  }

 private:
  void maybe_reorthonormalize() {
    if (orthonormality_error() > 1e-8) {
      Matrix q, r;
      qr_positive(q_, q, r);
      q_ = q;
      r_ = r * r_;  // preserve Q R = (Q_new R_qr) R
    }
  }

  Index k_;
  double decay_;
  BasisMode mode_;
  Matrix q_;  // n x k, orthonormal columns
  Matrix r_;  // k x k inner block
  Index samples_seen_ = 0;
};

}  // namespace streamtile
