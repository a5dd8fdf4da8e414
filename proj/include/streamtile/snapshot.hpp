#pragma once

#include <Eigen/Dense>

#include <vector>

#include "streamtile/core.hpp"

namespace streamtile {

// Immutable copy of the model parameters the prediction path needs. Once
// constructed it is never mutated, so any number of threads may read one
// concurrently while the learner keeps moving.
struct ModelSnapshot {
  Matrix transition;                   // N x N row-stochastic
  Matrix mu;                           // N x k node means
  std::vector<Matrix> chol_precision;  // per-node lower-triangular factors
  Vector alpha;                        // filtered posterior at copy time
  Vector log_det_half;                 // cached sum(log diag L_j) per node

  Index num_nodes() const { return mu.rows(); }
  Index latent_dim() const { return mu.cols(); }

  // Covariance of node j, reconstructed from its precision factor.
  Matrix covariance(Index j) const {
    const Matrix& l = chol_precision[static_cast<std::size_t>(j)];
    Matrix identity = Matrix::Identity(l.rows(), l.cols());
    Matrix linv = l.triangularView<Eigen::Lower>().solve(identity);
    return linv.transpose() * linv;
  }
};

}  // namespace streamtile
