#pragma once

#include <random>

#include "streamtile/model.hpp"

namespace streamtile::testing {

inline Matrix random_matrix(Index rows, Index cols, std::mt19937_64& rng,
                            double scale = 1.0) {
  std::normal_distribution<double> gauss(0.0, scale);
  Matrix m(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i) m(i, j) = gauss(rng);
  return m;
}

inline Vector random_vector(Index size, std::mt19937_64& rng, double scale = 1.0) {
  return random_matrix(size, 1, rng, scale);
}

inline Matrix random_lower_cholesky(Index k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> diag(0.6, 1.6);
  std::normal_distribution<double> gauss(0.0, 0.3);
  Matrix l = Matrix::Zero(k, k);
  for (Index i = 0; i < k; ++i) {
    for (Index j = 0; j < i; ++j) l(i, j) = gauss(rng);
    l(i, i) = diag(rng);
  }
  return l;
}

inline Matrix random_spd(Index k, std::mt19937_64& rng, double ridge = 0.5) {
  Matrix a = random_matrix(k, k, rng);
  return a * a.transpose() + ridge * Matrix::Identity(k, k);
}

struct ModelPieces {
  Hyperparameters hyper;
  NodeParams params;
  SuffStats stats;
  Priors priors;
};

// Random feasible point for objective/gradient tests: positive stats,
// well-conditioned factors, generic priors.
inline ModelPieces random_pieces(Index n, Index k, std::mt19937_64& rng) {
  ModelPieces p;
  p.hyper.num_nodes = n;
  p.hyper.latent_dim = k;
  p.hyper.beta = 1.3;

  p.params.mu = random_matrix(n, k, rng);
  p.params.logits = random_matrix(n, n, rng, 0.5);
  for (Index j = 0; j < n; ++j)
    p.params.chol_precision.push_back(random_lower_cholesky(k, rng));

  std::uniform_real_distribution<double> unif(0.0, 1.0);
  p.stats = SuffStats::zeros(n, k);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) p.stats.transition_counts(i, j) = unif(rng);
  p.stats.node_counts = p.stats.transition_counts.colwise().sum().transpose();
  p.stats.first_moment = random_matrix(n, k, rng);
  for (Index j = 0; j < n; ++j)
    p.stats.second_moment[static_cast<std::size_t>(j)] = random_spd(k, rng, 0.3);

  p.priors.mu0 = random_matrix(n, k, rng);
  p.priors.psi = random_spd(k, rng, 0.4);
  p.priors.lambda_j = Vector::Constant(n, 1e-3);
  p.priors.nu_j = Vector::Constant(n, 1e-3);
  p.priors.mu_bar = random_vector(k, rng);
  p.priors.sigma_bar = random_spd(k, rng);
  p.priors.eta = Vector::Constant(k, 0.1);
  return p;
}

// Model with hand-chosen parameters installed behind the public surface.
inline TilingModel make_model(Index n, Index k, std::uint64_t seed,
                              double teleport_threshold =
                                  -std::numeric_limits<double>::infinity()) {
  Hyperparameters hyper;
  hyper.num_nodes = n;
  hyper.latent_dim = k;
  hyper.seed = seed;
  hyper.teleport_threshold = teleport_threshold;
  hyper.init_buffer = std::max<Index>(4, k + 2);
  std::mt19937_64 rng(seed ^ 0xabcdef);
  Matrix buffer = random_matrix(hyper.init_buffer, k, rng);
  return TilingModel(buffer, hyper);
}

inline void install_params(TilingModel& model, const Matrix& mu,
                           const std::vector<Matrix>& chols, const Matrix& logits) {
  model.mutable_params().mu = mu;
  model.mutable_params().chol_precision = chols;
  model.mutable_params().logits = logits;
  model.refresh_caches();
}

// Dense-space reference density, independent of the factor-based code path.
inline double dense_log_pdf(const Vector& mu, const Matrix& sigma, const Vector& x) {
  const Index k = mu.size();
  const Matrix inv = sigma.inverse();
  const double quad = (x - mu).dot(inv * (x - mu));
  return -0.5 * (quad + std::log(sigma.determinant()) + k * std::log(2.0 * M_PI));
}

}  // namespace streamtile::testing
