#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <utility>

#include "streamtile/core.hpp"
#include "streamtile/gaussian.hpp"
#include "streamtile/snapshot.hpp"

namespace streamtile {

// T-step-ahead node occupancy: w_j = sum_i (A^T)_ij alpha_i, computed by
// repeated vector-matrix products so A^T is never materialized.
inline Vector predict_mixture(const ModelSnapshot& snap, Index t_ahead) {
  require(t_ahead >= 0, "predict_mixture: horizon must be >= 0");
  Vector w = snap.alpha;
  for (Index s = 0; s < t_ahead; ++s) w = snap.transition.transpose() * w;
  return w;
}

// log sum_j w_j N(x; mu_j, Sigma_j) over the mixture implied by weights w.
// Log-sum-exp keeps tight components from underflowing; zero weights are
// skipped. All-negligible mixtures give a large negative finite value.
inline double mixture_log_pdf(const Vector& w, const Matrix& mu,
                              const std::vector<Matrix>& chol_precision,
                              const Vector& log_det_half, const Vector& x) {
  const Index n = mu.rows();
  const Index k = mu.cols();
  Vector terms(n);
  Vector scratch(k);
  for (Index j = 0; j < n; ++j) {
    if (w[j] <= 0.0) {
      terms[j] = -std::numeric_limits<double>::infinity();
      continue;
    }
    scratch.noalias() = chol_precision[static_cast<std::size_t>(j)]
                            .transpose()
                            .triangularView<Eigen::Upper>() *
                        (x - mu.row(j).transpose());
    terms[j] = std::log(w[j]) - 0.5 * k * kLog2Pi + log_det_half[j] -
               0.5 * scratch.squaredNorm();
  }
  const double v = log_sum_exp(terms);
  return std::isfinite(v) ? v : -1e300;
}

// log p(x_{t+T} | x_{1:t}) under the snapshot, in nats.
inline double log_pred_prob(const ModelSnapshot& snap, const Vector& x_future,
                            Index t_ahead) {
  require(t_ahead >= 1, "log_pred_prob: horizon must be >= 1");
  require_shape(x_future.size() == snap.latent_dim(),
                "log_pred_prob: dimension mismatch");
  const Vector w = predict_mixture(snap, t_ahead);
  return mixture_log_pdf(w, snap.mu, snap.chol_precision, snap.log_det_half,
                         x_future);
}

struct EntropyValue {
  double nats = 0.0;
  double bits = 0.0;
};

// Shannon entropy of a discrete distribution, with 0 log 0 := 0.
inline EntropyValue entropy_of(const Vector& w) {
  double h = 0.0;
  for (Index j = 0; j < w.size(); ++j) {
    if (w[j] > 0.0) h -= w[j] * std::log(w[j]);
  }
  if (h < 0.0) h = 0.0;  // rounding can leave a tiny negative
  return {h, h / std::log(2.0)};
}

// Entropy of the T-step-ahead node occupancy.
inline EntropyValue entropy(const ModelSnapshot& snap, Index t_ahead) {
  require(t_ahead >= 1, "entropy: horizon must be >= 1");
  return entropy_of(predict_mixture(snap, t_ahead));
}

// log N(x_future; x_t, T sigma2 I): the density a random walk with per-step,
// per-dimension variance sigma2 assigns to the realized future observation.
inline double random_walk_log_pdf(double sigma2, const Vector& x_t,
                                  const Vector& x_future, Index t_ahead) {
  require(sigma2 > 0.0, "random_walk_log_pdf: sigma2 must be positive");
  require(t_ahead >= 1, "random_walk_log_pdf: horizon must be >= 1");
  require_shape(x_future.size() == x_t.size(), "random_walk_log_pdf: dimension mismatch");
  const double k = static_cast<double>(x_t.size());
  const double var = static_cast<double>(t_ahead) * sigma2;
  return -0.5 * k * std::log(2.0 * M_PI * var) -
         (x_future - x_t).squaredNorm() / (2.0 * var);
}

// Running random-walk reference: tracks the per-dimension one-step residual
// variance by exponential smoothing and scores future observations against
// a diffusion centered on the current point.
class RandomWalkBaseline {
 public:
  explicit RandomWalkBaseline(double rate = 0.01, double initial_sigma2 = 1.0)
      : rate_(rate), sigma2_(initial_sigma2) {
    require(rate > 0.0 && rate <= 1.0, "RandomWalkBaseline: rate must be in (0,1]");
    require(initial_sigma2 > 0.0, "RandomWalkBaseline: sigma2 must be positive");
  }

  void observe(const Vector& x) {
    if (has_prev_) {
      const double per_dim =
          (x - prev_).squaredNorm() / static_cast<double>(x.size());
      sigma2_ = (1.0 - rate_) * sigma2_ + rate_ * per_dim;
    }
    prev_ = x;
    has_prev_ = true;
  }

  double sigma2() const { return sigma2_; }

  double score(const Vector& x_future, Index t_ahead) const {
    require(has_prev_, "RandomWalkBaseline: no observations yet");
    return random_walk_log_pdf(sigma2_, prev_, x_future, t_ahead);
  }

  // Score against an explicit anchor point (the position at prediction time).
  double score_from(const Vector& x_t, const Vector& x_future, Index t_ahead) const {
    return random_walk_log_pdf(sigma2_, x_t, x_future, t_ahead);
  }

 private:
  double rate_;
  double sigma2_;
  Vector prev_;
  bool has_prev_ = false;
};

}  // namespace streamtile
