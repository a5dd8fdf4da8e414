// Command-line harness: simulate -> reduce -> model -> predict, with
// structured configuration, metrics emission, checkpointing, and a benchmark
// mode. Flags override config-file values; STREAMTILE_* environment variables
// override defaults for CI use.

#include "CLI11.hpp"
#include "streamtile/commands.hpp"

#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

namespace {

using streamtile::Index;
using streamtile::RunConfig;

std::vector<Index> parse_horizons(const std::string& csv) {
  std::vector<Index> out;
  std::stringstream ss(csv);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (!item.empty()) out.push_back(static_cast<Index>(std::stol(item)));
  }
  if (out.empty()) throw std::invalid_argument("empty horizon list");
  return out;
}

struct CommonFlags {
  std::string config_path;
  std::string out_dir;
  std::string horizons;
  std::string system;
  std::uint64_t seed = 0;
  bool seed_set = false;
  bool out_set = false;
  bool horizons_set = false;
  bool system_set = false;
  long steps = 0;
  double noise_frac = -1.0;
  long nodes = 0;
  long batch_period = 0;
  bool threaded = false;
};

void add_common_flags(CLI::App* cmd, CommonFlags& flags) {
  cmd->add_option("--config", flags.config_path, "JSON config file")
      ->envname("STREAMTILE_CONFIG");
  cmd->add_option("--seed", flags.seed, "random seed")
      ->envname("STREAMTILE_SEED")
      ->each([&](const std::string&) { flags.seed_set = true; });
  cmd->add_option("--out", flags.out_dir, "output directory")
      ->envname("STREAMTILE_OUT")
      ->each([&](const std::string&) { flags.out_set = true; });
  cmd->add_option("--T", flags.horizons, "prediction horizons, e.g. 1,5,10")
      ->envname("STREAMTILE_T")
      ->each([&](const std::string&) { flags.horizons_set = true; });
  cmd->add_option("--system", flags.system, "generator system (van_der_pol|lorenz)")
      ->each([&](const std::string&) { flags.system_set = true; });
  cmd->add_option("--steps", flags.steps, "generator steps");
  cmd->add_option("--noise-frac", flags.noise_frac, "generator noise fraction");
  cmd->add_option("--nodes", flags.nodes, "model node budget");
  cmd->add_option("--batch-period", flags.batch_period, "M-step cadence (B)");
  cmd->add_flag("--threaded", flags.threaded,
                "run learner and prediction consumer on separate threads");
}

RunConfig build_config(const CommonFlags& flags) {
  RunConfig cfg;
  if (!flags.config_path.empty()) cfg = streamtile::load_run_config(flags.config_path);
  if (flags.seed_set) {
    cfg.seed = flags.seed;
    if (cfg.input.file.empty()) cfg.input.trajectory.seed = flags.seed;
  }
  if (flags.out_set) cfg.out_dir = flags.out_dir;
  if (flags.horizons_set) cfg.horizons = parse_horizons(flags.horizons);
  if (flags.system_set) {
    const auto kind = streamtile::system_from_name(flags.system);
    streamtile::TrajectoryConfig fresh = kind == streamtile::SystemKind::lorenz
                                             ? streamtile::TrajectoryConfig::lorenz_default()
                                             : streamtile::TrajectoryConfig::van_der_pol_default();
    fresh.steps = cfg.input.trajectory.steps;
    fresh.noise_frac = cfg.input.trajectory.noise_frac;
    fresh.seed = cfg.input.trajectory.seed;
    cfg.input.trajectory = fresh;
  }
  if (flags.steps > 0) cfg.input.trajectory.steps = flags.steps;
  if (flags.noise_frac >= 0.0) cfg.input.trajectory.noise_frac = flags.noise_frac;
  if (flags.nodes > 0) cfg.model.num_nodes = flags.nodes;
  if (flags.batch_period > 0) cfg.model.batch_period = flags.batch_period;
  if (flags.threaded) cfg.threaded = true;
  return cfg;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"streaming manifold-tiling forecaster"};
  app.require_subcommand(1);

  CommonFlags run_flags, bench_flags, reduce_flags, sim_flags;
  CLI::App* run = app.add_subcommand("run", "learn and evaluate on a stream");
  CLI::App* bench = app.add_subcommand("bench", "timing benchmarks");
  CLI::App* reduce = app.add_subcommand("reduce", "dimensionality reduction only");
  CLI::App* simulate = app.add_subcommand("simulate", "generate synthetic trajectories");
  add_common_flags(run, run_flags);
  add_common_flags(bench, bench_flags);
  add_common_flags(reduce, reduce_flags);
  add_common_flags(simulate, sim_flags);

  CLI11_PARSE(app, argc, argv);

  try {
    if (run->parsed()) {
      RunConfig cfg = build_config(run_flags);
      auto artifacts = streamtile::cmd_run(cfg);
      for (const auto& h : artifacts.summary.per_horizon) {
        std::printf("T=%ld  log_pred_prob %.4f +- %.4f  entropy %.3f bits  (n=%zu)\n",
                    static_cast<long>(h.horizon), h.log_pred_prob.mean,
                    h.log_pred_prob.stddev, h.entropy_bits.mean,
                    h.log_pred_prob.count);
      }
      std::printf("artifacts written to %s\n", artifacts.dir.string().c_str());
    } else if (bench->parsed()) {
      RunConfig cfg = build_config(bench_flags);
      auto report = streamtile::cmd_bench(cfg);
      std::printf("%s\n", report.dump(2).c_str());
    } else if (reduce->parsed()) {
      RunConfig cfg = build_config(reduce_flags);
      auto dir = streamtile::cmd_reduce(cfg);
      std::printf("reduced stream written to %s\n", dir.string().c_str());
    } else if (simulate->parsed()) {
      RunConfig cfg = build_config(sim_flags);
      auto dir = streamtile::cmd_simulate(cfg);
      std::printf("trajectories written to %s\n", dir.string().c_str());
    }
  } catch (const std::invalid_argument& e) {
    std::cerr << "invalid configuration: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
