#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <random>
#include <string>

#include "streamtile/core.hpp"

namespace streamtile {

enum class SystemKind { van_der_pol, lorenz };

struct TrajectoryConfig {
  SystemKind system = SystemKind::van_der_pol;
  double vdp_mu = 1.0;       // Van der Pol stiffness
  double lorenz_sigma = 10.0;
  double lorenz_rho = 28.0;
  double lorenz_beta = 8.0 / 3.0;
  double dt = 0.1;           // 0.1 for Van der Pol, 0.01 for Lorenz
  Index steps = 1000;
  double noise_frac = 0.0;   // observation noise as a fraction of signal std
  std::uint64_t seed = 0;

  static TrajectoryConfig van_der_pol_default() {
    TrajectoryConfig c;
    c.system = SystemKind::van_der_pol;
    c.dt = 0.1;
    return c;
  }

  static TrajectoryConfig lorenz_default() {
    TrajectoryConfig c;
    c.system = SystemKind::lorenz;
    c.dt = 0.01;
    return c;
  }

  Index dim() const { return system == SystemKind::van_der_pol ? 2 : 3; }

  void validate() const {
    require(dt > 0.0, "TrajectoryConfig: dt must be positive");
    require(steps >= 1, "TrajectoryConfig: steps must be >= 1");
    require(noise_frac >= 0.0, "TrajectoryConfig: noise_frac must be >= 0");
  }
};

struct Trajectory {
  Matrix clean;  // D x steps
  Matrix noisy;  // D x steps
};

namespace detail {

inline Vector vdp_rhs(const Vector& s, double mu) {
  Vector d(2);
  d[0] = s[1];
  d[1] = mu * (1.0 - s[0] * s[0]) * s[1] - s[0];
  return d;
}

inline Vector lorenz_rhs(const Vector& s, double sigma, double rho, double beta) {
  Vector d(3);
  d[0] = sigma * (s[1] - s[0]);
  d[1] = s[0] * (rho - s[2]) - s[1];
  d[2] = s[0] * s[1] - beta * s[2];
  return d;
}

template <class Rhs>
Vector rk4_step(const Vector& s, double dt, Rhs rhs) {
  const Vector k1 = rhs(s);
  const Vector k2 = rhs(s + 0.5 * dt * k1);
  const Vector k3 = rhs(s + 0.5 * dt * k2);
  const Vector k4 = rhs(s + dt * k3);
  return s + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
}

}  // namespace detail

// Deterministic RK4 integration of the chosen system plus i.i.d. Gaussian
// observation noise scaled per dimension to noise_frac times the std of the
// clean trajectory. A fixed burn-in settles the state onto the attractor
// before recording starts.
inline Trajectory generate(const TrajectoryConfig& config) {
  config.validate();
  const Index dim = config.dim();
  std::mt19937_64 rng(config.seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  std::uniform_real_distribution<double> unif(-1.0, 1.0);

  Vector state(dim);
  if (config.system == SystemKind::van_der_pol) {
    state << 2.0 * unif(rng), 2.0 * unif(rng);
  } else {
    state << 1.0 + unif(rng), 1.0 + unif(rng), 20.0 + 5.0 * unif(rng);
  }

  auto advance = [&](const Vector& s) {
    if (config.system == SystemKind::van_der_pol)
      return detail::rk4_step(s, config.dt,
                              [&](const Vector& v) { return detail::vdp_rhs(v, config.vdp_mu); });
    return detail::rk4_step(s, config.dt, [&](const Vector& v) {
      return detail::lorenz_rhs(v, config.lorenz_sigma, config.lorenz_rho,
                                config.lorenz_beta);
    });
  };

  const Index burn_in = 1000;
  for (Index i = 0; i < burn_in; ++i) state = advance(state);

  Trajectory traj;
  traj.clean.resize(dim, config.steps);
  for (Index t = 0; t < config.steps; ++t) {
    traj.clean.col(t) = state;
    if (state.cwiseAbs().maxCoeff() > 1e8)
      throw integration_diverged_error("generate: trajectory diverged");
    state = advance(state);
  }

  traj.noisy = traj.clean;
  if (config.noise_frac > 0.0) {
    const Vector mean = traj.clean.rowwise().mean();
    Vector stddev(dim);
    for (Index d = 0; d < dim; ++d) {
      const double var =
          (traj.clean.row(d).array() - mean[d]).square().sum() / config.steps;
      stddev[d] = std::sqrt(var);
    }
    for (Index t = 0; t < config.steps; ++t)
      for (Index d = 0; d < dim; ++d)
        traj.noisy(d, t) += config.noise_frac * stddev[d] * gauss(rng);
  }
  return traj;
}

// Embed a D x steps trajectory into d dimensions through a fixed random
// linear map with orthonormal columns (distances preserved exactly), with
// optional isotropic observation noise.
inline Matrix lift(const Matrix& trajectory, Index d, std::uint64_t seed,
                   double lift_noise = 0.0) {
  const Index low = trajectory.rows();
  require(d >= low, "lift: target dimension must be >= source dimension");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);

  Matrix g(d, low);
  for (Index j = 0; j < low; ++j)
    for (Index i = 0; i < d; ++i) g(i, j) = gauss(rng);
  Matrix q, r;
  qr_positive(g, q, r);

  Matrix lifted = q * trajectory;
  if (lift_noise > 0.0) {
    for (Index t = 0; t < lifted.cols(); ++t)
      for (Index i = 0; i < d; ++i) lifted(i, t) += lift_noise * gauss(rng);
  }
  return lifted;
}

inline SystemKind system_from_name(const std::string& name) {
  if (name == "van_der_pol" || name == "vdp") return SystemKind::van_der_pol;
  if (name == "lorenz") return SystemKind::lorenz;
  throw std::invalid_argument("unknown system: " + name);
}

inline std::string system_name(SystemKind kind) {
  return kind == SystemKind::van_der_pol ? "van_der_pol" : "lorenz";
}

}  // namespace streamtile
