#pragma once

#include <Eigen/Dense>

#include "streamtile/core.hpp"

namespace streamtile {

struct AdamConfig {
  double step_size = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

// First/second moment accumulators for one parameter block. Ascent variant:
// update() moves the parameter in the gradient direction.
class AdamState {
 public:
  AdamState() = default;
  AdamState(Index rows, Index cols)
      : m_(Matrix::Zero(rows, cols)), v_(Matrix::Zero(rows, cols)) {}

  // One bias-corrected step; `t` is the 1-based global step count.
  void update(Matrix& param, const Matrix& grad, long t, const AdamConfig& cfg) {
    m_ = cfg.beta1 * m_ + (1.0 - cfg.beta1) * grad;
    v_ = cfg.beta2 * v_ + (1.0 - cfg.beta2) * grad.cwiseProduct(grad);
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(t));
    param.array() += cfg.step_size * (m_.array() / c1) /
                     ((v_.array() / c2).sqrt() + cfg.epsilon);
  }

  const Matrix& first_moment() const { return m_; }
  const Matrix& second_moment() const { return v_; }
  Matrix& first_moment() { return m_; }
  Matrix& second_moment() { return v_; }

 private:
  Matrix m_, v_;
};

}  // namespace streamtile
