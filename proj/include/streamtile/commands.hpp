#pragma once

#include <condition_variable>
#include <filesystem>
#include <fstream>
#include <mutex>
#include <thread>

#include "streamtile/harness.hpp"

namespace streamtile {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Threaded evaluation: the learner thread observes and periodically publishes
// snapshots; a consumer thread issues and scores predictions from the latest
// snapshot available when each sample was observed. Predictions therefore use
// slightly stale parameters but never future information.

inline EvalResult eval_stream_threaded(Pipeline& pipeline, const Matrix& data_cols,
                                       const std::vector<Index>& horizons,
                                       PhaseTimings* phases, Index publish_period) {
  require(publish_period >= 1, "eval_stream_threaded: publish period must be >= 1");
  Index max_h = 0;
  for (Index h : horizons) {
    require(h >= 1, "eval_stream_threaded: horizons must be >= 1");
    max_h = std::max(max_h, h);
  }
  const long total = data_cols.cols();
  if (total < 2 * max_h + pipeline.warmup())
    throw insufficient_data_error("eval_stream_threaded: stream too short");

  struct Item {
    long t;
    Vector embedded;
    std::shared_ptr<const ModelSnapshot> snap;
    double learn_time;
  };

  std::mutex mu;
  std::condition_variable cv;
  std::deque<Item> queue;
  bool done = false;

  SnapshotPublisher<ModelSnapshot> publisher;
  EvalResult result;
  result.total_steps = total;

  std::thread learner_thread([&] {
    long since_publish = 0;
    for (long t = 0; t < total; ++t) {
      detail::StopWatch watch;
      Vector embedded = pipeline.observe(data_cols.col(t), phases);
      const double learn_time = watch.seconds();
      {
        std::lock_guard<std::mutex> lock(mu);
        result.learn_times.push_back(learn_time);
      }
      if (embedded.size() == 0) continue;
      if (pipeline.ready()) {
        if (++since_publish >= publish_period || !publisher.load()) {
          publisher.publish(pipeline.model().snapshot());
          since_publish = 0;
        }
      }
      {
        std::lock_guard<std::mutex> lock(mu);
        queue.push_back(Item{t, std::move(embedded), publisher.load(), learn_time});
      }
      cv.notify_one();
    }
    {
      std::lock_guard<std::mutex> lock(mu);
      done = true;
    }
    cv.notify_one();
  });

  struct Pending {
    long target;
    Index horizon;
    Vector weights;
    std::shared_ptr<const ModelSnapshot> snap;
    EntropyValue entropy;
    double predict_time;
    Vector anchor;
    double rw_sigma2;
  };

  RandomWalkBaseline baseline;
  std::deque<Pending> pending;

  auto consume = [&](const Item& item) {
    baseline.observe(item.embedded);
    while (!pending.empty() && pending.front().target <= item.t) {
      Pending& p = pending.front();
      if (p.target == item.t) {
        MetricsRecord r;
        r.t = item.t;
        r.horizon = p.horizon;
        r.log_pred_prob = mixture_log_pdf(p.weights, p.snap->mu, p.snap->chol_precision,
                                          p.snap->log_det_half, item.embedded);
        r.entropy_nats = p.entropy.nats;
        r.entropy_bits = p.entropy.bits;
        r.learn_time = item.learn_time;
        r.predict_time = p.predict_time;
        r.baseline_log_pred_prob =
            random_walk_log_pdf(p.rw_sigma2, p.anchor, item.embedded, r.horizon);
        result.series.add(r);
      }
      pending.pop_front();
    }
    if (!item.snap) return;

    detail::StopWatch watch;
    Vector w = item.snap->alpha;
    std::vector<Vector> weights(horizons.size());
    for (Index step = 1; step <= max_h; ++step) {
      w = item.snap->transition.transpose() * w;
      for (std::size_t i = 0; i < horizons.size(); ++i)
        if (horizons[i] == step) weights[i] = w;
    }
    const double predict_time = watch.seconds();
    result.predict_times.push_back(predict_time);

    for (std::size_t i = 0; i < horizons.size(); ++i) {
      const long target = item.t + horizons[i];
      if (target >= total) continue;
      pending.push_back(Pending{target, horizons[i], weights[i], item.snap,
                                entropy_of(weights[i]), predict_time, item.embedded,
                                baseline.sigma2()});
    }
    std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
      return a.target != b.target ? a.target < b.target : a.horizon < b.horizon;
    });
  };

  std::thread consumer_thread([&] {
    for (;;) {
      Item item;
      {
        std::unique_lock<std::mutex> lock(mu);
        cv.wait(lock, [&] { return !queue.empty() || done; });
        if (queue.empty()) return;
        item = std::move(queue.front());
        queue.pop_front();
      }
      consume(item);
    }
  });

  learner_thread.join();
  consumer_thread.join();
  result.summary = result.series.summarize_last_half(total);
  return result;
}

// ---------------------------------------------------------------------------
// Subcommands. Each returns its primary artifact and writes files under
// cfg.out_dir.

struct RunArtifacts {
  fs::path dir;
  EvalSummary summary;
  TimingReport timing;
};

inline RunArtifacts cmd_run(const RunConfig& cfg) {
  Matrix data = acquire_input(cfg);
  cfg.validate(data.rows());

  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);

  Pipeline pipeline(cfg, data.rows());
  PhaseTimings phases;
  EvalResult result =
      cfg.threaded
          ? eval_stream_threaded(pipeline, data, cfg.horizons, &phases,
                                 cfg.publish_period)
          : eval_stream(pipeline, data, cfg.horizons, &phases);

  result.series.write_csv((dir / "metrics.csv").string());
  result.series.write_jsonl((dir / "metrics.jsonl").string());

  nlohmann::json summary = to_json(result.summary);
  summary["seed"] = cfg.seed;
  summary["threaded"] = cfg.threaded;
  {
    std::ofstream out(dir / "summary.json");
    out << summary.dump(2) << "\n";
  }

  RunArtifacts artifacts;
  artifacts.dir = dir;
  artifacts.summary = result.summary;
  artifacts.timing =
      make_timing_report(phases, result.learn_times, result.predict_times);
  {
    std::ofstream out(dir / "timing.json");
    out << artifacts.timing.to_json().dump(2) << "\n";
  }

  save_checkpoint((dir / "model.ckpt").string(), pipeline.model());
  return artifacts;
}

// Learn-only pass used by the benchmark cases.
inline TimingReport bench_learn_pass(const RunConfig& cfg, const Matrix& data) {
  Pipeline pipeline(cfg, data.rows());
  PhaseTimings phases;
  std::vector<double> learn_times;
  learn_times.reserve(static_cast<std::size_t>(data.cols()));
  for (Index t = 0; t < data.cols(); ++t) {
    detail::StopWatch watch;
    pipeline.observe(data.col(t), &phases);
    learn_times.push_back(watch.seconds());
  }
  return make_timing_report(phases, std::move(learn_times), {});
}

inline nlohmann::json cmd_bench(const RunConfig& cfg) {
  Matrix data = acquire_input(cfg);
  cfg.validate(data.rows());
  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);

  nlohmann::json cases = nlohmann::json::array();

  // Node-budget scaling.
  std::vector<Index> node_cases;
  for (Index n = cfg.model.num_nodes; n >= 1; n /= 4) {
    node_cases.push_back(n);
    if (n == 1) break;
  }
  std::sort(node_cases.begin(), node_cases.end());
  for (Index nodes : node_cases) {
    RunConfig c = cfg;
    c.model.num_nodes = nodes;
    TimingReport report = bench_learn_pass(c, data);
    nlohmann::json j = report.to_json();
    j["case"] = "nodes";
    j["nodes"] = nodes;
    j["batch_period"] = c.model.batch_period;
    cases.push_back(j);
  }

  // Amortization: single-step vs batch-mode M-steps.
  for (Index period : std::vector<Index>{1, 30}) {
    RunConfig c = cfg;
    c.model.batch_period = period;
    TimingReport report = bench_learn_pass(c, data);
    nlohmann::json j = report.to_json();
    j["case"] = "batch_period";
    j["nodes"] = c.model.num_nodes;
    j["batch_period"] = period;
    cases.push_back(j);
  }

  // Prediction latency from a trained snapshot.
  {
    RunConfig c = cfg;
    Pipeline pipeline(c, data.rows());
    for (Index t = 0; t < data.cols(); ++t) pipeline.observe(data.col(t));
    const ModelSnapshot snap = pipeline.model().snapshot();
    const Vector probe = Vector::Zero(snap.latent_dim());
    std::vector<double> times;
    const int reps = 300;
    double sink = 0.0;
    for (int r = 0; r < reps; ++r) {
      detail::StopWatch watch;
      sink += log_pred_prob(snap, probe, 1);
      times.push_back(watch.seconds());
    }
    Percentiles p = percentiles_of(std::move(times));
    cases.push_back({{"case", "prediction"},
                     {"nodes", cfg.model.num_nodes},
                     {"reps", reps},
                     {"checksum", sink},
                     {"predict_percentiles",
                      {{"p50", p.p50}, {"p95", p.p95}, {"p99", p.p99}}}});
  }

  nlohmann::json report{{"cases", cases}, {"samples", data.cols()}};
  {
    std::ofstream out(dir / "bench.json");
    out << report.dump(2) << "\n";
  }
  return report;
}

inline fs::path cmd_reduce(const RunConfig& cfg) {
  require(cfg.reduce.k > 0 || cfg.reduce.n > 0,
          "cmd_reduce: configure reduce.n and/or reduce.k");
  Matrix data = acquire_input(cfg);
  cfg.validate(data.rows());
  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);

  std::optional<SparseProjection> projection;
  if (cfg.reduce.n > 0)
    projection.emplace(data.rows(), cfg.reduce.n, cfg.seed ^ 0x517cc1b727220a95ull,
                       cfg.reduce.mode);

  Matrix stage1 = projection ? projection->apply(data) : data;

  if (cfg.reduce.k > 0) {
    const Index init_cols = cfg.reduce.init_samples > 0
                                ? cfg.reduce.init_samples
                                : std::max(cfg.reduce.k, cfg.reduce.batch);
    require(stage1.cols() > init_cols, "cmd_reduce: not enough samples for init");
    ProcrustesSvd svd(stage1.leftCols(init_cols), cfg.reduce.k,
                      {cfg.reduce.decay, BasisMode::procrustes});

    Matrix reduced(cfg.reduce.k, stage1.cols());
    reduced.leftCols(init_cols) = svd.project(stage1.leftCols(init_cols));
    Index pos = init_cols;
    while (pos < stage1.cols()) {
      const Index width = std::min(cfg.reduce.batch, stage1.cols() - pos);
      const Matrix block = stage1.middleCols(pos, width);
      svd.update(block);
      reduced.middleCols(pos, width) = svd.project(block);
      pos += width;
    }
    save_matrix((dir / "reduced.mflw").string(), reduced);
    save_matrix((dir / "basis_q.mflw").string(), svd.basis());
    save_matrix((dir / "inner_r.mflw").string(), svd.inner_block());
  } else {
    save_matrix((dir / "reduced.mflw").string(), stage1);
  }
  return dir;
}

inline fs::path cmd_simulate(const RunConfig& cfg) {
  fs::create_directories(cfg.out_dir);
  const fs::path dir(cfg.out_dir);
  Trajectory traj = generate(cfg.input.trajectory);
  save_matrix((dir / "clean.mflw").string(), traj.clean);
  save_matrix((dir / "noisy.mflw").string(), traj.noisy);
  if (cfg.input.lift_dim > 0) {
    Matrix lifted = lift(traj.noisy, cfg.input.lift_dim,
                         cfg.seed ^ 0x9e3779b97f4a7c15ull, cfg.input.lift_noise);
    save_matrix((dir / "lifted.mflw").string(), lifted);
  }
  nlohmann::json manifest{{"system", system_name(cfg.input.trajectory.system)},
                          {"steps", cfg.input.trajectory.steps},
                          {"dt", cfg.input.trajectory.dt},
                          {"noise_frac", cfg.input.trajectory.noise_frac},
                          {"seed", cfg.input.trajectory.seed},
                          {"lift_dim", cfg.input.lift_dim}};
  std::ofstream out(dir / "manifest.json");
  out << manifest.dump(2) << "\n";
  return dir;
}

}  // namespace streamtile
