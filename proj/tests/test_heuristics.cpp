#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "helpers.hpp"
#include "streamtile/model.hpp"

using namespace streamtile;
using namespace streamtile::testing;

TEST_CASE("no teleport when some node explains the observation") {
  TilingModel model = make_model(3, 2, 41, /*teleport_threshold=*/-20.0);
  Matrix mu(3, 2);
  mu << 0.0, 0.0, 1.0, 1.0, -1.0, 0.5;
  std::vector<Matrix> chols(3, Matrix::Identity(2, 2));
  install_params(model, mu, chols, Matrix::Zero(3, 3));

  Matrix mu_before = model.params().mu;
  Vector alpha_before = model.stats().alpha;
  Vector x(2);
  x << 0.1, -0.1;  // close to node 0
  REQUIRE_FALSE(model.maybe_teleport(x));
  REQUIRE((model.params().mu - mu_before).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE((model.stats().alpha - alpha_before).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("breadcrumb phase consumes unused nodes in index order") {
  TilingModel model = make_model(4, 2, 42, -5.0);
  REQUIRE(model.dead_nodes().size() == 4);

  Vector far(2);
  far << 50.0, 50.0;
  REQUIRE(model.maybe_teleport(far));
  REQUIRE((model.params().mu.row(0).transpose() - far).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(model.stats().alpha[0] == 1.0);
  REQUIRE(model.dead_nodes() == std::vector<Index>{1, 2, 3});

  Vector far2(2);
  far2 << -60.0, 80.0;
  REQUIRE(model.maybe_teleport(far2));
  REQUIRE(model.dead_nodes() == std::vector<Index>{2, 3});
  REQUIRE((model.params().mu.row(1).transpose() - far2).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("node reclamation picks the smallest count with lowest-index ties") {
  TilingModel model = make_model(3, 2, 43, -5.0);
  model.set_dead_nodes({});  // all nodes in use

  model.mutable_stats().transition_counts.setZero();
  model.mutable_stats().transition_counts(0, 0) = 3.0;
  model.mutable_stats().transition_counts(0, 1) = 0.5;
  model.mutable_stats().transition_counts(0, 2) = 0.5;  // tie between 1 and 2
  model.mutable_stats().node_counts =
      model.mutable_stats().transition_counts.colwise().sum().transpose();

  Vector far(2);
  far << 100.0, -100.0;
  REQUIRE(model.maybe_teleport(far));
  REQUIRE((model.params().mu.row(1).transpose() - far).cwiseAbs().maxCoeff() == 0.0);
  REQUIRE(model.stats().alpha[1] == 1.0);
  REQUIRE(model.stats().node_counts[1] == 0.0);
  REQUIRE(model.stats().first_moment.row(1).cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("teleport keeps statistics invariants and covers the point") {
  std::mt19937_64 rng(44);
  TilingModel model = make_model(5, 2, 45, std::numeric_limits<double>::quiet_NaN());
  model.set_dead_nodes({});
  // accumulate real statistics first
  for (int i = 0; i < 30; ++i) model.observe(random_vector(2, rng));

  Vector far(2);
  far << 1e3, -1e3;
  REQUIRE(model.maybe_teleport(far));

  const auto& stats = model.stats();
  Vector colsum = stats.transition_counts.colwise().sum().transpose();
  REQUIRE((stats.node_counts - colsum).cwiseAbs().maxCoeff() < 1e-8);
  REQUIRE(stats.alpha.sum() == Catch::Approx(1.0).margin(1e-12));

  Index target = 0;
  for (Index j = 0; j < 5; ++j)
    if (stats.alpha[j] == 1.0) target = j;
  const double logp = gaussian_log_pdf(
      model.params().mu.row(target).transpose(),
      model.params().chol_precision[static_cast<std::size_t>(target)], far);
  REQUIRE(logp >= model.hyper().resolved_teleport_threshold());
}

TEST_CASE("teleport disabled at minus-infinity threshold") {
  TilingModel model = make_model(3, 2, 46);  // helper default: -inf
  Vector far(2);
  far << 1e6, 1e6;
  REQUIRE_FALSE(model.maybe_teleport(far));
}

TEST_CASE("single-node prior scale is the floored global covariance") {
  std::mt19937_64 rng(47);
  TilingModel model = make_model(1, 2, 48);
  for (int i = 0; i < 10; ++i) model.observe(random_vector(2, rng));

  model.update_priors();
  const Matrix& psi = model.priors().psi;
  Matrix expected = model.priors().sigma_bar;  // N^(2/k) = 1
  add_jitter(expected);
  REQUIRE((psi - expected).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("prior means decay geometrically toward the data mean when eta is zero") {
  const Index n = 3, k = 2;
  TilingModel model = make_model(n, k, 49);

  // Constant data mean with zero covariance makes the walk deterministic.
  Vector c(2);
  c << 2.0, -1.0;
  auto& stats = model.mutable_stats();
  stats.node_counts = Vector::Constant(n, 5.0);
  stats.transition_counts = Matrix::Constant(n, n, 5.0 / n);
  stats.first_moment = (Vector::Constant(n, 5.0) * c.transpose());
  for (Index j = 0; j < n; ++j)
    stats.second_moment[static_cast<std::size_t>(j)] = 5.0 * c * c.transpose();

  model.mutable_priors().mu0.setZero();
  const double rate = model.hyper().prior_walk_rate;
  Vector expected = Vector::Zero(k);
  for (int step = 0; step < 20; ++step) {
    model.update_priors();
    expected = (1.0 - rate) * expected + rate * c;
  }
  REQUIRE(model.priors().eta.cwiseAbs().maxCoeff() < 1e-9);
  for (Index j = 0; j < n; ++j)
    REQUIRE((model.priors().mu0.row(j).transpose() - expected).cwiseAbs().maxCoeff() <
            1e-9);
}

TEST_CASE("prior walk reaches the stationary variance of the recursion") {
  // Frozen data statistics keep mu_bar and eta constant; each node-dimension
  // entry is then an independent AR(1) whose stationary variance is
  // eta^2 / (2 lambda - lambda^2).
  const Index n = 3000, k = 2;
  Hyperparameters hyper;
  hyper.num_nodes = n;
  hyper.latent_dim = k;
  hyper.seed = 50;
  hyper.init_buffer = 4;
  std::mt19937_64 rng(51);
  TilingModel model(random_matrix(4, k, rng), hyper);

  auto& stats = model.mutable_stats();
  Matrix sigma_target(2, 2);
  sigma_target << 1.3, 0.2, 0.2, 0.8;
  Vector mean_target(2);
  mean_target << 0.7, -0.4;
  stats.node_counts = Vector::Constant(n, 1.0);
  stats.transition_counts = Matrix::Constant(n, n, 1.0 / n);
  stats.first_moment = Vector::Constant(n, 1.0) * mean_target.transpose();
  const Matrix second = sigma_target + mean_target * mean_target.transpose();
  for (Index j = 0; j < n; ++j)
    stats.second_moment[static_cast<std::size_t>(j)] = second;

  const int steps = 1200;
  for (int step = 0; step < steps; ++step) model.update_priors();

  const double lambda_walk = model.hyper().prior_walk_rate;
  const Vector eta = model.priors().eta;
  double mean_ratio = 0.0;
  for (Index d = 0; d < k; ++d) {
    double var = 0.0;
    for (Index j = 0; j < n; ++j) {
      const double dev = model.priors().mu0(j, d) - model.priors().mu_bar[d];
      var += dev * dev;
    }
    var /= static_cast<double>(n);
    const double expected =
        eta[d] * eta[d] / (2.0 * lambda_walk - lambda_walk * lambda_walk);
    mean_ratio += var / expected;
  }
  mean_ratio /= static_cast<double>(k);
  REQUIRE(mean_ratio == Catch::Approx(1.0).margin(0.05));
}

TEST_CASE("prior update is skipped while statistics are empty") {
  TilingModel model = make_model(2, 2, 52);
  Matrix mu0_before = model.priors().mu0;
  REQUIRE_FALSE(model.update_priors());
  REQUIRE((model.priors().mu0 - mu0_before).cwiseAbs().maxCoeff() == 0.0);
}
