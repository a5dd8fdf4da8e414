#pragma once

#include <Eigen/Dense>

#include <cassert>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "streamtile/adam.hpp"
#include "streamtile/core.hpp"
#include "streamtile/gaussian.hpp"
#include "streamtile/snapshot.hpp"

namespace streamtile {

struct Hyperparameters {
  Index num_nodes = 100;  // node budget N
  Index latent_dim = 2;   // k

  double lambda = 1e-3;  // NIW mean pseudo-count
  double nu = 1e-3;      // NIW dof offset
  double beta = 1.0;     // transition prior; 1 makes the (beta-1) term vanish

  // Forgetting rate for the sufficient statistics. When forget_c > 0 the
  // schedule eps_t = forget_c / (t + forget_t0) is used instead of the
  // constant rate.
  double forget_rate = 0.01;
  double forget_c = 0.0;
  double forget_t0 = 0.0;

  // Log-density threshold below which an observation triggers a node
  // teleport. NaN resolves to -10 * latent_dim; -inf disables teleporting.
  double teleport_threshold = std::numeric_limits<double>::quiet_NaN();

  AdamConfig adam;               // gradient M-step settings
  double prior_walk_rate = 0.02; // decay/step scale of the prior-mean walk
  Index init_buffer = 30;        // M, samples used by init
  Index batch_period = 1;        // B, M-step cadence in amortized mode
  std::uint64_t seed = 0;

  double resolved_teleport_threshold() const {
    return std::isnan(teleport_threshold)
               ? -10.0 * static_cast<double>(latent_dim)
               : teleport_threshold;
  }

  double forget(long t) const {
    if (forget_c > 0.0) {
      const double e = forget_c / (static_cast<double>(t) + forget_t0);
      return std::min(1.0, std::max(0.0, e));
    }
    return forget_rate;
  }

  void validate() const {
    require(num_nodes >= 1, "Hyperparameters: num_nodes must be >= 1");
    require(latent_dim >= 1, "Hyperparameters: latent_dim must be >= 1");
    require(forget_rate >= 0.0 && forget_rate <= 1.0,
            "Hyperparameters: forget_rate must be in [0,1]");
    require(lambda > 0.0 && nu > 0.0, "Hyperparameters: lambda and nu must be positive");
    require(batch_period >= 1, "Hyperparameters: batch_period must be >= 1");
    require(init_buffer >= 2, "Hyperparameters: init_buffer must be >= 2");
  }
};

// Accumulated (discounted) sufficient statistics and the filtered posterior.
struct SuffStats {
  Matrix transition_counts;          // N x N
  Vector node_counts;                // N, column sums of transition_counts
  Matrix first_moment;               // N x k, row j holds S1_j
  std::vector<Matrix> second_moment; // N matrices of k x k, S2_j
  Vector alpha;                      // filtered posterior over nodes

  static SuffStats zeros(Index n, Index k) {
    SuffStats s;
    s.transition_counts = Matrix::Zero(n, n);
    s.node_counts = Vector::Zero(n);
    s.first_moment = Matrix::Zero(n, k);
    s.second_moment.assign(n, Matrix::Zero(k, k));
    s.alpha = Vector::Constant(n, 1.0 / static_cast<double>(n));
    return s;
  }
};

// Free node parameters: means, precision Cholesky factors, transition logits.
struct NodeParams {
  Matrix mu;                           // N x k
  std::vector<Matrix> chol_precision;  // N lower-triangular k x k factors
  Matrix logits;                       // N x N; A = row-softmax(logits)

  Matrix transition() const {
    const Index n = logits.rows();
    Matrix a(n, n);
    for (Index i = 0; i < n; ++i) {
      const double m = logits.row(i).maxCoeff();
      a.row(i) = (logits.row(i).array() - m).exp();
      a.row(i) /= a.row(i).sum();
    }
    return a;
  }
};

// Empirical-Bayes NIW priors, shared scale Psi, and the prior-mean walk state.
struct Priors {
  Matrix mu0;        // N x k prior means
  Matrix psi;        // k x k shared prior scale
  Vector lambda_j;   // per-node mean pseudo-counts
  Vector nu_j;       // per-node dof offsets
  Vector mu_bar;     // running data mean
  Matrix sigma_bar;  // running data covariance
  Vector eta;        // per-dimension walk step scale
};

struct ElboGradients {
  Matrix logits;                       // N x N
  Matrix mu;                           // N x k
  std::vector<Matrix> chol_precision;  // N lower-triangular k x k
};

struct FilterResult {
  Matrix gamma;      // N x N update matrix
  Vector alpha_new;  // filtered posterior after the step
  bool degenerate = false;
};

// Wall-clock phase accumulators for one or more learning steps.
struct PhaseTimings {
  double teleport_check = 0.0;
  double e_step = 0.0;
  double prior_update = 0.0;
  double m_step = 0.0;
  long samples = 0;
  long m_steps = 0;
};

namespace detail {

inline void floor_and_normalize(Vector& alpha) {
  alpha = alpha.cwiseMax(1e-16);
  alpha /= alpha.sum();
}

class StopWatch {
 public:
  StopWatch() : start_(std::chrono::steady_clock::now()) {}
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_)
        .count();
  }

 private:
  std::chrono::steady_clock::time_point start_;
};

}  // namespace detail

// Evidence-lower-bound estimate for the current parameters under the
// accumulated statistics and priors.
inline double elbo(const NodeParams& params, const SuffStats& stats,
                   const Priors& priors, const Hyperparameters& hyper) {
  const Index n = hyper.num_nodes;
  const Index k = hyper.latent_dim;
  double total = 0.0;

  for (Index i = 0; i < n; ++i) {
    const double lse = log_sum_exp(params.logits.row(i).transpose());
    for (Index j = 0; j < n; ++j) {
      const double coeff = stats.transition_counts(i, j) + hyper.beta - 1.0;
      if (coeff != 0.0) total += coeff * (params.logits(i, j) - lse);
    }
  }

  for (Index j = 0; j < n; ++j) {
    const Matrix& l = params.chol_precision[j];
    const Matrix prec = l * l.transpose();
    const Vector mu_j = params.mu.row(j).transpose();
    const Vector mu0_j = priors.mu0.row(j).transpose();
    const double lam = priors.lambda_j[j];
    const double count = stats.node_counts[j];

    const Vector s1 = stats.first_moment.row(j).transpose() + lam * mu0_j;
    Matrix w = priors.psi + stats.second_moment[j] + lam * mu0_j * mu0_j.transpose() +
               (lam + count) * mu_j * mu_j.transpose();
    const double dof = priors.nu_j[j] + count + static_cast<double>(k) + 2.0;

    double log_det_half = 0.0;
    for (Index i = 0; i < k; ++i) log_det_half += std::log(l(i, i));

    total += s1.dot(prec * mu_j) - 0.5 * (w * prec).trace() + dof * log_det_half;
  }

  if (!std::isfinite(total)) throw numerical_error("elbo: non-finite value");
  return total;
}

// Analytic gradients of the objective with respect to the unconstrained
// variables: logits, means, and the lower-triangular precision factors.
// `transition` must be the row-softmax of params.logits; the overload below
// computes it when no cached copy is available.
inline ElboGradients elbo_gradient(const NodeParams& params, const SuffStats& stats,
                                   const Priors& priors, const Hyperparameters& hyper,
                                   const Matrix& transition) {
  const Index n = hyper.num_nodes;
  const Index k = hyper.latent_dim;
  ElboGradients g;
  g.mu.resize(n, k);
  g.chol_precision.assign(n, Matrix::Zero(k, k));

  g.logits = stats.transition_counts.array() + (hyper.beta - 1.0);
  const Vector row_sums = g.logits.rowwise().sum();
  g.logits -= row_sums.asDiagonal() * transition;

  for (Index j = 0; j < n; ++j) {
    const Matrix& l = params.chol_precision[j];
    const Matrix prec = l * l.transpose();
    const Vector mu_j = params.mu.row(j).transpose();
    const Vector mu0_j = priors.mu0.row(j).transpose();
    const double lam = priors.lambda_j[j];
    const double count = stats.node_counts[j];

    const Vector s1 = stats.first_moment.row(j).transpose() + lam * mu0_j;
    Matrix w = priors.psi + stats.second_moment[j] + lam * mu0_j * mu0_j.transpose() +
               (lam + count) * mu_j * mu_j.transpose();
    const double dof = priors.nu_j[j] + count + static_cast<double>(k) + 2.0;

    g.mu.row(j) = (prec * (s1 - (lam + count) * mu_j)).transpose();

    Matrix gl = (s1 * mu_j.transpose() + mu_j * s1.transpose()) * l - w * l;
    for (Index i = 0; i < k; ++i) gl(i, i) += dof / l(i, i);
    g.chol_precision[j] = gl.triangularView<Eigen::Lower>();
  }

  if (!g.logits.allFinite() || !g.mu.allFinite())
    throw numerical_error("elbo_gradient: non-finite value");
  return g;
}

inline ElboGradients elbo_gradient(const NodeParams& params, const SuffStats& stats,
                                   const Priors& priors, const Hyperparameters& hyper) {
  return elbo_gradient(params, stats, priors, hyper, params.transition());
}

// One E-step statistics update given the filter output (direct form).
inline SuffStats update_suff_stats(const SuffStats& stats, const Vector& alpha_prev,
                                   const Matrix& gamma, const Vector& x, double eps) {
  require(eps >= 0.0 && eps <= 1.0, "update_suff_stats: eps must be in [0,1]");
  const Index n = stats.transition_counts.rows();
  require_shape(alpha_prev.size() == n && gamma.rows() == n && gamma.cols() == n,
                "update_suff_stats: shape mismatch");
  const double keep = 1.0 - eps;

  SuffStats out = stats;
  out.transition_counts = keep * stats.transition_counts +
                          alpha_prev.asDiagonal() * gamma;
  out.node_counts = out.transition_counts.colwise().sum().transpose();

  Vector alpha_new = gamma.transpose() * alpha_prev;
  detail::floor_and_normalize(alpha_new);
  out.first_moment = keep * stats.first_moment + alpha_new * x.transpose();
  for (Index j = 0; j < n; ++j)
    out.second_moment[j] = keep * stats.second_moment[j] +
                           alpha_new[j] * (x * x.transpose());
  out.alpha = alpha_new;
  return out;
}

// Online GMM-HMM tiling of the latent space: a budget of N Gaussian nodes
// with Markov transitions, learned one sample at a time by accumulating
// discounted sufficient statistics (E-step) and taking adaptive-moment
// gradient steps on the objective (M-step). Single writer; snapshot() hands
// immutable copies to concurrent readers.
class TilingModel {
 public:
  // Initialize node parameters and priors from a small buffer of samples
  // (rows). Every node starts at the buffer mean with the packing-scaled
  // buffer covariance, and all nodes are teleport-eligible.
  TilingModel(const Matrix& buffer, const Hyperparameters& hyper)
      : hyper_(hyper), rng_(hyper.seed) {
    hyper_.validate();
    require(buffer.rows() >= 2, "TilingModel: init buffer needs at least 2 samples");
    require_shape(buffer.cols() == hyper_.latent_dim,
                  "TilingModel: buffer column count must equal latent_dim");
    require_finite(buffer, "TilingModel init buffer");

    const Index n = hyper_.num_nodes;
    const Index k = hyper_.latent_dim;
    const double m = static_cast<double>(buffer.rows());

    const Vector mean = buffer.colwise().mean().transpose();
    Matrix centered = buffer.rowwise() - mean.transpose();
    Matrix cov = (centered.transpose() * centered) / m;

    priors_.mu_bar = mean;
    priors_.sigma_bar = eigen_floor_psd(cov);
    priors_.eta =
        (hyper_.prior_walk_rate * priors_.sigma_bar.diagonal()).cwiseSqrt();
    priors_.mu0 = mean.transpose().replicate(n, 1);
    priors_.lambda_j = Vector::Constant(n, hyper_.lambda);
    priors_.nu_j = Vector::Constant(n, hyper_.nu);
    priors_.psi = packing_scale(priors_.sigma_bar);

    Matrix sigma_init = priors_.psi;
    Matrix l_init = cholesky_of_inverse(sigma_init);

    params_.mu = mean.transpose().replicate(n, 1);
    params_.chol_precision.assign(n, l_init);
    params_.logits = Matrix::Zero(n, n);

    stats_ = SuffStats::zeros(n, k);

    opt_logits_ = AdamState(n, n);
    opt_mu_ = AdamState(n, k);
    opt_chol_.assign(n, AdamState(k, k));

    used_.assign(static_cast<std::size_t>(n), 0);
    refresh_transition_cache();
  }

  const Hyperparameters& hyper() const { return hyper_; }
  const NodeParams& params() const { return params_; }
  const Priors& priors() const { return priors_; }
  const SuffStats& stats() const { return stats_; }
  const Matrix& transition() const { return transition_; }
  const AdamState& opt_logits() const { return opt_logits_; }
  const AdamState& opt_mu() const { return opt_mu_; }
  const std::vector<AdamState>& opt_chol() const { return opt_chol_; }
  const std::mt19937_64& rng() const { return rng_; }
  long steps() const { return t_; }

  std::vector<Index> dead_nodes() const {
    std::vector<Index> out;
    for (Index j = 0; j < hyper_.num_nodes; ++j)
      if (!used_[static_cast<std::size_t>(j)]) out.push_back(j);
    return out;
  }

  // Per-node observation log densities log p(x | z = j).
  Vector log_obs_densities(const Vector& x) const {
    require_shape(x.size() == hyper_.latent_dim, "log_obs_densities: dimension mismatch");
    const Index n = hyper_.num_nodes;
    Vector out(n);
    Vector scratch(hyper_.latent_dim);
    for (Index j = 0; j < n; ++j) {
      scratch.noalias() = params_.chol_precision[j]
                              .transpose()
                              .triangularView<Eigen::Upper>() *
                          (x - params_.mu.row(j).transpose());
      out[j] = -0.5 * hyper_.latent_dim * kLog2Pi + log_det_half_[j] -
               0.5 * scratch.squaredNorm();
    }
    return out;
  }

  // One step of the normalized forward recursion. Materializes the full
  // update matrix; the learning path uses a fused variant instead.
  FilterResult forward_filter(const Vector& x) const {
    const Vector log_b = log_obs_densities(x);
    const double shift = log_b.maxCoeff();
    const Vector b_scaled = (log_b.array() - shift).exp();
    const Vector predicted = transition_.transpose() * stats_.alpha;
    const double z_scaled = predicted.dot(b_scaled);

    FilterResult res;
    if (!(z_scaled > 0.0) || !std::isfinite(z_scaled)) {
      res.degenerate = true;
      res.alpha_new = stats_.alpha;
      res.gamma = Matrix::Zero(hyper_.num_nodes, hyper_.num_nodes);
      return res;
    }
    res.gamma = transition_ * (b_scaled / z_scaled).asDiagonal();
    res.alpha_new = predicted.cwiseProduct(b_scaled) / z_scaled;
    detail::floor_and_normalize(res.alpha_new);
    return res;
  }

  // Relocate an unused (or least-supported) node onto x when no node gives
  // the observation a log density above the threshold. Returns true if a
  // teleport happened.
  bool maybe_teleport(const Vector& x) {
    require_shape(x.size() == hyper_.latent_dim, "maybe_teleport: dimension mismatch");
    const Vector log_b = log_obs_densities(x);
    return teleport_if_needed(x, log_b, false);
  }

  // Full learning step: teleport check, forward filter, statistics update,
  // prior update, one gradient step.
  void observe(const Vector& x, PhaseTimings* timings = nullptr) {
    step(x, true, timings);
  }

  // Amortized learning: the E-step runs per sample, the prior update and the
  // gradient step run once every `batch_period` samples.
  void observe_batch(const Matrix& x_cols, Index batch_period,
                     PhaseTimings* timings = nullptr) {
    require(batch_period >= 1, "observe_batch: batch period must be >= 1");
    require_shape(x_cols.rows() == hyper_.latent_dim,
                  "observe_batch: row count must equal latent_dim");
    for (Index c = 0; c < x_cols.cols(); ++c) {
      const bool m_step = ((t_ + 1) % batch_period) == 0;
      step(x_cols.col(c), m_step, timings);
    }
  }

  void observe_batch(const Matrix& x_cols, PhaseTimings* timings = nullptr) {
    observe_batch(x_cols, hyper_.batch_period, timings);
  }

  // Empirical-Bayes prior refresh: running data mean/covariance, the biased
  // random walk on the prior means, and the packing-scaled shared scale.
  // Skipped (returns false) while the statistics are still all zero.
  bool update_priors() {
    const double total = stats_.node_counts.sum();
    if (!(total > 0.0)) return false;

    const Index n = hyper_.num_nodes;
    const Index k = hyper_.latent_dim;

    priors_.mu_bar = stats_.first_moment.colwise().sum().transpose() / total;
    Matrix second = Matrix::Zero(k, k);
    for (Index j = 0; j < n; ++j) second += stats_.second_moment[j];
    priors_.sigma_bar = eigen_floor_psd(
        second / total - priors_.mu_bar * priors_.mu_bar.transpose());
    priors_.eta =
        (hyper_.prior_walk_rate * priors_.sigma_bar.diagonal()).cwiseSqrt();

    const double w = hyper_.prior_walk_rate;
    std::normal_distribution<double> gauss(0.0, 1.0);
    for (Index j = 0; j < n; ++j) {
      for (Index d = 0; d < k; ++d) {
        priors_.mu0(j, d) = (1.0 - w) * priors_.mu0(j, d) + w * priors_.mu_bar[d] +
                            priors_.eta[d] * gauss(rng_);
      }
    }

    priors_.psi = packing_scale(priors_.sigma_bar);
    return true;
  }

  // Immutable copy of everything the prediction path needs.
  ModelSnapshot snapshot() const {
    ModelSnapshot snap;
    snap.transition = transition_;
    snap.mu = params_.mu;
    snap.chol_precision = params_.chol_precision;
    snap.alpha = stats_.alpha;
    snap.log_det_half = log_det_half_;
    return snap;
  }

  // Mutable access for checkpoint restore; callers must re-establish
  // invariants via refresh_caches().
  NodeParams& mutable_params() { return params_; }
  Priors& mutable_priors() { return priors_; }
  SuffStats& mutable_stats() { return stats_; }
  AdamState& mutable_opt_logits() { return opt_logits_; }
  AdamState& mutable_opt_mu() { return opt_mu_; }
  std::vector<AdamState>& mutable_opt_chol() { return opt_chol_; }
  std::mt19937_64& rng() { return rng_; }
  void set_steps(long t, long opt_steps) {
    t_ = t;
    opt_steps_ = opt_steps;
  }
  void set_dead_nodes(const std::vector<Index>& dead) {
    used_.assign(static_cast<std::size_t>(hyper_.num_nodes), 1);
    for (Index j : dead) used_[static_cast<std::size_t>(j)] = 0;
  }
  void refresh_caches() { refresh_transition_cache(); }

 private:
  Matrix packing_scale(const Matrix& sigma) const {
    const double shrink = std::pow(static_cast<double>(hyper_.num_nodes),
                                   2.0 / static_cast<double>(hyper_.latent_dim));
    Matrix psi = sigma / shrink;
    add_jitter(psi);
    return psi;
  }

  void refresh_transition_cache() {
    transition_ = params_.transition();
    const Index n = hyper_.num_nodes;
    log_det_half_.resize(n);
    for (Index j = 0; j < n; ++j) {
      double s = 0.0;
      for (Index i = 0; i < hyper_.latent_dim; ++i)
        s += std::log(params_.chol_precision[j](i, i));
      log_det_half_[j] = s;
    }
  }

  // Teleport given precomputed log densities. `force` relocates even above
  // threshold (used when the filter degenerates).
  bool teleport_if_needed(const Vector& x, const Vector& log_b, bool force) {
    // theta = -inf disables teleporting (max >= -inf always holds).
    const double theta = hyper_.resolved_teleport_threshold();
    if (!force && log_b.maxCoeff() >= theta) return false;

    Index target = -1;
    for (Index j = 0; j < hyper_.num_nodes; ++j) {
      if (!used_[static_cast<std::size_t>(j)]) {
        target = j;
        break;
      }
    }
    if (target < 0) {
      // Reclaim the node with the smallest effective count; ties go to the
      // lowest index.
      Index best = 0;
      for (Index j = 1; j < hyper_.num_nodes; ++j)
        if (stats_.node_counts[j] < stats_.node_counts[best]) best = j;
      target = best;
    }

    // Drop the reclaimed node's statistics, keeping node_counts consistent
    // with the column sums.
    const Index n = hyper_.num_nodes;
    for (Index j = 0; j < n; ++j)
      stats_.node_counts[j] -= stats_.transition_counts(target, j);
    stats_.transition_counts.row(target).setZero();
    stats_.transition_counts.col(target).setZero();
    stats_.node_counts[target] = 0.0;
    stats_.first_moment.row(target).setZero();
    stats_.second_moment[static_cast<std::size_t>(target)].setZero();

    params_.mu.row(target) = x.transpose();
    stats_.alpha.setZero();
    stats_.alpha[target] = 1.0;
    used_[static_cast<std::size_t>(target)] = 1;

    assert(gaussian_log_pdf(params_.mu.row(target).transpose(),
                            params_.chol_precision[static_cast<std::size_t>(target)],
                            x) >= theta ||
           std::isinf(theta));
    return true;
  }

  // Fused filter + statistics update; never materializes the N x N update
  // matrix. Matches update_suff_stats() up to summation order.
  bool e_step(const Vector& x, double eps) {
    const Index n = hyper_.num_nodes;
    const double keep = 1.0 - eps;

    Vector log_b = log_obs_densities(x);
    const double shift = log_b.maxCoeff();
    Vector b_scaled = (log_b.array() - shift).exp();
    Vector predicted = transition_.transpose() * stats_.alpha;
    const double z_scaled = predicted.dot(b_scaled);
    if (!(z_scaled > 0.0) || !std::isfinite(z_scaled)) return false;

    b_scaled /= z_scaled;  // now b_j / Z in the shifted scale

    const Vector& alpha_prev = stats_.alpha;
    for (Index j = 0; j < n; ++j) {
      const double w = b_scaled[j];
      stats_.transition_counts.col(j) =
          keep * stats_.transition_counts.col(j) +
          w * alpha_prev.cwiseProduct(transition_.col(j));
      stats_.node_counts[j] = stats_.transition_counts.col(j).sum();
    }

    Vector alpha_new = predicted.cwiseProduct(b_scaled);
    detail::floor_and_normalize(alpha_new);
    stats_.first_moment = keep * stats_.first_moment + alpha_new * x.transpose();
    const Matrix outer = x * x.transpose();
    for (Index j = 0; j < n; ++j)
      stats_.second_moment[static_cast<std::size_t>(j)] =
          keep * stats_.second_moment[static_cast<std::size_t>(j)] +
          alpha_new[j] * outer;
    stats_.alpha = alpha_new;
    return true;
  }

  void gradient_step() {
    ElboGradients g = elbo_gradient(params_, stats_, priors_, hyper_, transition_);
    ++opt_steps_;
    opt_logits_.update(params_.logits, g.logits, opt_steps_, hyper_.adam);
    opt_mu_.update(params_.mu, g.mu, opt_steps_, hyper_.adam);
    for (Index j = 0; j < hyper_.num_nodes; ++j) {
      auto js = static_cast<std::size_t>(j);
      opt_chol_[js].update(params_.chol_precision[js], g.chol_precision[js],
                           opt_steps_, hyper_.adam);
      // The factor diagonal must stay positive for the density to exist.
      for (Index i = 0; i < hyper_.latent_dim; ++i) {
        double& d = params_.chol_precision[js](i, i);
        if (d < 1e-12) d = 1e-12;
      }
    }
    refresh_transition_cache();
  }

  void step(const Vector& x, bool run_m_step, PhaseTimings* timings) {
    require_shape(x.size() == hyper_.latent_dim, "observe: dimension mismatch");
    if (!x.allFinite()) throw data_error("observe: non-finite sample");

    const double eps = hyper_.forget(t_ + 1);

    {
      detail::StopWatch w;
      const Vector log_b = log_obs_densities(x);
      teleport_if_needed(x, log_b, false);
      if (timings) timings->teleport_check += w.seconds();
    }
    {
      detail::StopWatch w;
      if (!e_step(x, eps)) {
        // Degenerate filter: relocate a node onto the sample and retry from
        // the one-hot posterior.
        teleport_if_needed(x, log_obs_densities(x), true);
        if (!e_step(x, eps))
          throw numerical_error("observe: filter degenerate after teleport");
      }
      mark_supported_nodes();
      if (timings) timings->e_step += w.seconds();
    }
    ++t_;
    if (run_m_step) {
      {
        detail::StopWatch w;
        update_priors();
        if (timings) timings->prior_update += w.seconds();
      }
      {
        detail::StopWatch w;
        gradient_step();
        if (timings) {
          timings->m_step += w.seconds();
          ++timings->m_steps;
        }
      }
    }
    if (timings) ++timings->samples;
  }

  // A node stops being teleport-eligible once it has accumulated real
  // support.
  void mark_supported_nodes() {
    const double threshold = 10.0 * hyper_.lambda;
    for (Index j = 0; j < hyper_.num_nodes; ++j) {
      if (!used_[static_cast<std::size_t>(j)] && stats_.node_counts[j] > threshold)
        used_[static_cast<std::size_t>(j)] = 1;
    }
  }

  Hyperparameters hyper_;
  NodeParams params_;
  Priors priors_;
  SuffStats stats_;

  Matrix transition_;     // cached row-softmax of logits
  Vector log_det_half_;   // cached sum(log diag L_j)

  AdamState opt_logits_;
  AdamState opt_mu_;
  std::vector<AdamState> opt_chol_;
  long opt_steps_ = 0;
  long t_ = 0;

  std::vector<std::uint8_t> used_;
  std::mt19937_64 rng_;

 public:
  long opt_steps() const { return opt_steps_; }
};

}  // namespace streamtile
