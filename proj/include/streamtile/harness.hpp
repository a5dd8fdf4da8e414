#pragma once

#include <nlohmann/json.hpp>

#include <algorithm>
#include <condition_variable>
#include <deque>
#include <filesystem>
#include <fstream>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "streamtile/checkpoint.hpp"
#include "streamtile/core.hpp"
#include "streamtile/eval.hpp"
#include "streamtile/matrix_io.hpp"
#include "streamtile/metrics.hpp"
#include "streamtile/model.hpp"
#include "streamtile/predict.hpp"
#include "streamtile/procrustes_svd.hpp"
#include "streamtile/publisher.hpp"
#include "streamtile/sparse_projection.hpp"
#include "streamtile/systems.hpp"

namespace streamtile {

struct InputConfig {
  std::string file;  // MFLW or CSV path; empty means "generate"
  TrajectoryConfig trajectory;
  bool use_clean = false;  // generated data: feed clean instead of noisy
  Index lift_dim = 0;      // 0 = no lift
  double lift_noise = 0.0;
};

struct ReduceConfig {
  Index n = 0;  // random-projection output dim; 0 skips the stage
  Index k = 0;  // svd rank; 0 skips the stage
  Index batch = 1;
  double decay = 1.0;
  DensityMode mode = DensityMode::achlioptas;
  Index init_samples = 0;  // columns for svd init; 0 means max(k, batch)
};

struct RunConfig {
  std::uint64_t seed = 0;
  std::string out_dir = "out";
  std::string mode = "run";  // run | bench | reduce | simulate
  InputConfig input;
  ReduceConfig reduce;
  Hyperparameters model;
  std::vector<Index> horizons = {1};
  bool threaded = false;
  Index publish_period = 1;  // snapshot cadence in threaded mode
  std::string resume_checkpoint;

  // Dimension of samples entering the model.
  Index latent_dim(Index input_dim) const {
    if (reduce.k > 0) return reduce.k;
    if (reduce.n > 0) return reduce.n;
    return input_dim;
  }

  void validate(Index input_dim) const {
    require(input_dim >= 1, "RunConfig: empty input");
    if (reduce.n > 0)
      require(reduce.n <= input_dim, "RunConfig: n must not exceed input dimension");
    if (reduce.k > 0) {
      const Index stage_in = reduce.n > 0 ? reduce.n : input_dim;
      require(reduce.k <= stage_in, "RunConfig: k must not exceed n");
    }
    require(reduce.batch >= 1, "RunConfig: reduce batch must be >= 1");
    for (Index h : horizons) require(h >= 1, "RunConfig: horizons must be >= 1");
    require(!horizons.empty(), "RunConfig: at least one horizon required");
  }
};

// ---------------------------------------------------------------------------
// Config file parsing (JSON document mapping onto RunConfig; CLI flags
// override individual fields afterwards).

inline RunConfig parse_run_config(const nlohmann::json& j) {
  RunConfig cfg;
  cfg.seed = j.value("seed", cfg.seed);
  cfg.out_dir = j.value("out", cfg.out_dir);
  cfg.mode = j.value("mode", cfg.mode);
  cfg.threaded = j.value("threaded", cfg.threaded);
  cfg.publish_period = j.value("publish_period", cfg.publish_period);
  cfg.resume_checkpoint = j.value("resume_checkpoint", cfg.resume_checkpoint);

  if (j.contains("input")) {
    const auto& ji = j.at("input");
    cfg.input.file = ji.value("file", std::string());
    if (ji.contains("system"))
      cfg.input.trajectory.system = system_from_name(ji.at("system").get<std::string>());
    TrajectoryConfig defaults = cfg.input.trajectory.system == SystemKind::lorenz
                                    ? TrajectoryConfig::lorenz_default()
                                    : TrajectoryConfig::van_der_pol_default();
    defaults.system = cfg.input.trajectory.system;
    cfg.input.trajectory = defaults;
    cfg.input.trajectory.steps = ji.value("steps", cfg.input.trajectory.steps);
    cfg.input.trajectory.dt = ji.value("dt", cfg.input.trajectory.dt);
    cfg.input.trajectory.noise_frac =
        ji.value("noise_frac", cfg.input.trajectory.noise_frac);
    cfg.input.trajectory.vdp_mu = ji.value("vdp_mu", cfg.input.trajectory.vdp_mu);
    cfg.input.trajectory.lorenz_sigma =
        ji.value("lorenz_sigma", cfg.input.trajectory.lorenz_sigma);
    cfg.input.trajectory.lorenz_rho =
        ji.value("lorenz_rho", cfg.input.trajectory.lorenz_rho);
    cfg.input.trajectory.lorenz_beta =
        ji.value("lorenz_beta", cfg.input.trajectory.lorenz_beta);
    cfg.input.trajectory.seed = ji.value("seed", cfg.seed);
    cfg.input.use_clean = ji.value("use_clean", cfg.input.use_clean);
    cfg.input.lift_dim = ji.value("lift_dim", cfg.input.lift_dim);
    cfg.input.lift_noise = ji.value("lift_noise", cfg.input.lift_noise);
  }

  if (j.contains("reduce")) {
    const auto& jr = j.at("reduce");
    cfg.reduce.n = jr.value("n", cfg.reduce.n);
    cfg.reduce.k = jr.value("k", cfg.reduce.k);
    cfg.reduce.batch = jr.value("batch", cfg.reduce.batch);
    cfg.reduce.decay = jr.value("decay", cfg.reduce.decay);
    cfg.reduce.init_samples = jr.value("init_samples", cfg.reduce.init_samples);
    const std::string mode = jr.value("mode", std::string("achlioptas"));
    if (mode == "achlioptas")
      cfg.reduce.mode = DensityMode::achlioptas;
    else if (mode == "very_sparse" || mode == "very-sparse")
      cfg.reduce.mode = DensityMode::very_sparse;
    else
      throw std::invalid_argument("RunConfig: unknown projection mode " + mode);
  }

  if (j.contains("model")) {
    const auto& jm = j.at("model");
    Hyperparameters& h = cfg.model;
    h.num_nodes = jm.value("nodes", h.num_nodes);
    h.latent_dim = jm.value("latent_dim", h.latent_dim);
    h.lambda = jm.value("lambda", h.lambda);
    h.nu = jm.value("nu", h.nu);
    h.beta = jm.value("beta", h.beta);
    h.forget_rate = jm.value("forget_rate", h.forget_rate);
    h.forget_c = jm.value("forget_c", h.forget_c);
    h.forget_t0 = jm.value("forget_t0", h.forget_t0);
    if (jm.contains("teleport_threshold"))
      h.teleport_threshold = detail::threshold_from_json(jm.at("teleport_threshold"));
    h.adam.step_size = jm.value("step_size", h.adam.step_size);
    h.adam.beta1 = jm.value("adam_beta1", h.adam.beta1);
    h.adam.beta2 = jm.value("adam_beta2", h.adam.beta2);
    h.adam.epsilon = jm.value("adam_epsilon", h.adam.epsilon);
    h.prior_walk_rate = jm.value("prior_walk_rate", h.prior_walk_rate);
    h.init_buffer = jm.value("init_buffer", h.init_buffer);
    h.batch_period = jm.value("batch_period", h.batch_period);
  }

  if (j.contains("eval")) {
    const auto& je = j.at("eval");
    if (je.contains("T")) cfg.horizons = je.at("T").get<std::vector<Index>>();
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::invalid_argument("load_run_config: cannot open " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw std::invalid_argument(std::string("load_run_config: bad JSON: ") + e.what());
  }
  return parse_run_config(j);
}

// ---------------------------------------------------------------------------
// Input acquisition.

inline Matrix acquire_input(const RunConfig& cfg) {
  Matrix data;
  if (!cfg.input.file.empty()) {
    data = load_matrix_any(cfg.input.file);
  } else {
    Trajectory traj = generate(cfg.input.trajectory);
    data = cfg.input.use_clean ? std::move(traj.clean) : std::move(traj.noisy);
  }
  if (cfg.input.lift_dim > 0)
    data = lift(data, cfg.input.lift_dim, cfg.seed ^ 0x9e3779b97f4a7c15ull,
                cfg.input.lift_noise);
  if (!data.allFinite()) throw data_error("acquire_input: non-finite input data");
  return data;
}

// ---------------------------------------------------------------------------
// Full pipeline learner: optional projection, optional streaming SVD, model.
// Implements the eval_stream learner interface; observe() returns the
// model-space embedding (empty until the SVD stage has initialized).

class Pipeline {
 public:
  Pipeline(const RunConfig& cfg, Index input_dim)
      : cfg_(cfg), input_dim_(input_dim) {
    cfg_.validate(input_dim);
    if (cfg_.reduce.n > 0)
      projection_.emplace(input_dim, cfg_.reduce.n, cfg_.seed ^ 0x517cc1b727220a95ull,
                          cfg_.reduce.mode);
    Hyperparameters hyper = cfg_.model;
    hyper.latent_dim = cfg_.latent_dim(input_dim);
    hyper.seed = cfg_.seed;
    learner_ = std::make_unique<ModelLearner>(hyper);
    if (!cfg_.resume_checkpoint.empty())
      preloaded_ = std::make_unique<TilingModel>(load_checkpoint(cfg_.resume_checkpoint));
  }

  bool ready() const { return learner_ && learner_->ready(); }

  Index warmup() const {
    Index w = cfg_.model.init_buffer;
    if (cfg_.reduce.k > 0) w += svd_init_samples();
    return w;
  }

  Vector observe(const Vector& x, PhaseTimings* timings = nullptr) {
    Vector v = x;
    if (projection_) v = projection_->apply(v);

    if (cfg_.reduce.k > 0) {
      if (!svd_) {
        svd_buffer_.push_back(v);
        if (static_cast<Index>(svd_buffer_.size()) < svd_init_samples()) return Vector();
        Matrix init(v.size(), static_cast<Index>(svd_buffer_.size()));
        for (std::size_t i = 0; i < svd_buffer_.size(); ++i)
          init.col(static_cast<Index>(i)) = svd_buffer_[i];
        svd_.emplace(init, cfg_.reduce.k,
                     ProcrustesSvd::Options{cfg_.reduce.decay, BasisMode::procrustes});
        svd_buffer_.clear();
        return feed_model(svd_->project(v), timings);
      }
      pending_.push_back(v);
      if (static_cast<Index>(pending_.size()) >= cfg_.reduce.batch) {
        Matrix block(v.size(), static_cast<Index>(pending_.size()));
        for (std::size_t i = 0; i < pending_.size(); ++i)
          block.col(static_cast<Index>(i)) = pending_[i];
        svd_->update(block);
        pending_.clear();
      }
      v = svd_->project(v);
    }
    return feed_model(v, timings);
  }

  PredictionSet predict(const std::vector<Index>& horizons) const {
    return learner_->predict(horizons);
  }

  ModelLearner& learner() { return *learner_; }
  const ModelLearner& learner() const { return *learner_; }
  const std::optional<ProcrustesSvd>& svd() const { return svd_; }
  const std::optional<SparseProjection>& projection() const { return projection_; }
  TilingModel& model() { return learner_->model(); }
  const TilingModel& model() const { return learner_->model(); }

 private:
  Index svd_init_samples() const {
    if (cfg_.reduce.init_samples > 0) return cfg_.reduce.init_samples;
    return std::max(cfg_.reduce.k, cfg_.reduce.batch);
  }

  Vector feed_model(const Vector& v, PhaseTimings* timings) {
    if (preloaded_) {
      // Resume: skip buffered init and adopt the checkpointed model.
      learner_->adopt(std::move(preloaded_));
      preloaded_.reset();
    }
    return learner_->observe(v, timings);
  }

  RunConfig cfg_;
  Index input_dim_;
  std::optional<SparseProjection> projection_;
  std::optional<ProcrustesSvd> svd_;
  std::vector<Vector> svd_buffer_;
  std::vector<Vector> pending_;
  std::unique_ptr<ModelLearner> learner_;
  std::unique_ptr<TilingModel> preloaded_;
};

// ---------------------------------------------------------------------------
// Timing report.

struct Percentiles {
  double p50 = 0.0;
  double p95 = 0.0;
  double p99 = 0.0;
};

inline Percentiles percentiles_of(std::vector<double> xs) {
  Percentiles p;
  if (xs.empty()) return p;
  std::sort(xs.begin(), xs.end());
  auto at = [&](double q) {
    const auto idx = static_cast<std::size_t>(q * (xs.size() - 1));
    return xs[idx];
  };
  p.p50 = at(0.50);
  p.p95 = at(0.95);
  p.p99 = at(0.99);
  return p;
}

struct TimingReport {
  PhaseTimings phases;
  double total_learn_seconds = 0.0;
  double amortized_learn_seconds = 0.0;  // per sample, warm-up excluded
  Percentiles learn;
  Percentiles predict;
  long warmup_excluded = 0;

  nlohmann::json to_json() const {
    return {{"phases",
             {{"teleport_check", phases.teleport_check},
              {"e_step", phases.e_step},
              {"prior_update", phases.prior_update},
              {"m_step", phases.m_step},
              {"samples", phases.samples},
              {"m_steps", phases.m_steps}}},
            {"total_learn_seconds", total_learn_seconds},
            {"amortized_learn_seconds", amortized_learn_seconds},
            {"learn_percentiles",
             {{"p50", learn.p50}, {"p95", learn.p95}, {"p99", learn.p99}}},
            {"predict_percentiles",
             {{"p50", predict.p50}, {"p95", predict.p95}, {"p99", predict.p99}}},
            {"warmup_excluded", warmup_excluded}};
  }
};

inline TimingReport make_timing_report(const PhaseTimings& phases,
                                       std::vector<double> learn_times,
                                       std::vector<double> predict_times,
                                       long warmup = 100) {
  TimingReport report;
  report.phases = phases;
  for (double t : learn_times) report.total_learn_seconds += t;
  if (static_cast<long>(learn_times.size()) > warmup)
    learn_times.erase(learn_times.begin(), learn_times.begin() + warmup);
  else
    warmup = 0;
  report.warmup_excluded = warmup;
  if (!learn_times.empty()) {
    double sum = 0.0;
    for (double t : learn_times) sum += t;
    report.amortized_learn_seconds = sum / static_cast<double>(learn_times.size());
  }
  report.learn = percentiles_of(std::move(learn_times));
  report.predict = percentiles_of(std::move(predict_times));
  return report;
}

}  // namespace streamtile
