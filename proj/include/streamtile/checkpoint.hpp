#pragma once

#include <nlohmann/json.hpp>

#include <cstdint>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "streamtile/core.hpp"
#include "streamtile/model.hpp"

namespace streamtile {

// Versioned model checkpoint: magic "MCKP", u32 version, u64 header length,
// JSON header (shapes, hyperparameters, counters, RNG state), then the
// matrices named by the header as row-major float64 little-endian payload.
inline constexpr char kCheckpointMagic[4] = {'M', 'C', 'K', 'P'};
inline constexpr std::uint32_t kCheckpointVersion = 1;

namespace detail {

using RowMajor = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline void write_payload(std::ofstream& out, const Matrix& m) {
  RowMajor rm = m;
  out.write(reinterpret_cast<const char*>(rm.data()),
            static_cast<std::streamsize>(sizeof(double) * rm.size()));
}

inline Matrix read_payload(std::ifstream& in, Index rows, Index cols) {
  RowMajor rm(rows, cols);
  in.read(reinterpret_cast<char*>(rm.data()),
          static_cast<std::streamsize>(sizeof(double) * rows * cols));
  if (!in) throw format_error("checkpoint: truncated payload");
  return rm;
}

// JSON numbers cannot carry NaN or infinities, so the threshold round-trips
// through a string in those cases.
inline nlohmann::json threshold_to_json(double v) {
  if (std::isnan(v)) return "auto";
  if (std::isinf(v)) return v < 0 ? "-inf" : "inf";
  return v;
}

inline double threshold_from_json(const nlohmann::json& j) {
  if (j.is_string()) {
    const std::string s = j.get<std::string>();
    if (s == "auto") return std::numeric_limits<double>::quiet_NaN();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    throw format_error("checkpoint: bad teleport_threshold value");
  }
  if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
  return j.get<double>();
}

inline nlohmann::json hyper_to_json(const Hyperparameters& h) {
  return {{"num_nodes", h.num_nodes},
          {"latent_dim", h.latent_dim},
          {"lambda", h.lambda},
          {"nu", h.nu},
          {"beta", h.beta},
          {"forget_rate", h.forget_rate},
          {"forget_c", h.forget_c},
          {"forget_t0", h.forget_t0},
          {"teleport_threshold", threshold_to_json(h.teleport_threshold)},
          {"adam_step_size", h.adam.step_size},
          {"adam_beta1", h.adam.beta1},
          {"adam_beta2", h.adam.beta2},
          {"adam_epsilon", h.adam.epsilon},
          {"prior_walk_rate", h.prior_walk_rate},
          {"init_buffer", h.init_buffer},
          {"batch_period", h.batch_period},
          {"seed", h.seed}};
}

inline Hyperparameters hyper_from_json(const nlohmann::json& j) {
  Hyperparameters h;
  h.num_nodes = j.at("num_nodes").get<Index>();
  h.latent_dim = j.at("latent_dim").get<Index>();
  h.lambda = j.at("lambda").get<double>();
  h.nu = j.at("nu").get<double>();
  h.beta = j.at("beta").get<double>();
  h.forget_rate = j.at("forget_rate").get<double>();
  h.forget_c = j.at("forget_c").get<double>();
  h.forget_t0 = j.at("forget_t0").get<double>();
  h.teleport_threshold = threshold_from_json(j.at("teleport_threshold"));
  h.adam.step_size = j.at("adam_step_size").get<double>();
  h.adam.beta1 = j.at("adam_beta1").get<double>();
  h.adam.beta2 = j.at("adam_beta2").get<double>();
  h.adam.epsilon = j.at("adam_epsilon").get<double>();
  h.prior_walk_rate = j.at("prior_walk_rate").get<double>();
  h.init_buffer = j.at("init_buffer").get<Index>();
  h.batch_period = j.at("batch_period").get<Index>();
  h.seed = j.at("seed").get<std::uint64_t>();
  return h;
}

}  // namespace detail

inline void save_checkpoint(const std::string& path, const TilingModel& model) {
  const Index n = model.hyper().num_nodes;
  const Index k = model.hyper().latent_dim;

  std::ostringstream rng_state;
  rng_state << model.rng();

  std::vector<std::pair<std::string, const Matrix*>> singles = {
      {"mu", &model.params().mu},
      {"logits", &model.params().logits},
      {"mu0", &model.priors().mu0},
      {"psi", &model.priors().psi},
      {"sigma_bar", &model.priors().sigma_bar},
      {"transition_counts", &model.stats().transition_counts},
      {"first_moment", &model.stats().first_moment},
      {"opt_logits_m", &model.opt_logits().first_moment()},
      {"opt_logits_v", &model.opt_logits().second_moment()},
      {"opt_mu_m", &model.opt_mu().first_moment()},
      {"opt_mu_v", &model.opt_mu().second_moment()},
  };

  nlohmann::json header;
  header["format"] = "tiling-model-checkpoint";
  header["version"] = kCheckpointVersion;
  header["hyper"] = detail::hyper_to_json(model.hyper());
  header["steps"] = model.steps();
  header["opt_steps"] = model.opt_steps();
  header["dead_nodes"] = model.dead_nodes();
  header["rng_state"] = rng_state.str();
  header["vectors"] = {{"lambda_j", model.hyper().num_nodes},
                       {"nu_j", model.hyper().num_nodes},
                       {"mu_bar", k},
                       {"eta", k},
                       {"node_counts", n},
                       {"alpha", n}};
  nlohmann::json mats = nlohmann::json::array();
  for (const auto& [name, m] : singles)
    mats.push_back({{"name", name}, {"rows", m->rows()}, {"cols", m->cols()}});
  mats.push_back({{"name", "chol_precision"}, {"rows", n * k}, {"cols", k}});
  mats.push_back({{"name", "second_moment"}, {"rows", n * k}, {"cols", k}});
  mats.push_back({{"name", "opt_chol_m"}, {"rows", n * k}, {"cols", k}});
  mats.push_back({{"name", "opt_chol_v"}, {"rows", n * k}, {"cols", k}});
  header["matrices"] = mats;

  const std::string header_str = header.dump();

  std::ofstream out(path, std::ios::binary);
  if (!out) throw data_error("save_checkpoint: cannot open " + path);
  out.write(kCheckpointMagic, 4);
  const std::uint32_t version = kCheckpointVersion;
  const std::uint64_t header_len = header_str.size();
  out.write(reinterpret_cast<const char*>(&version), sizeof(version));
  out.write(reinterpret_cast<const char*>(&header_len), sizeof(header_len));
  out.write(header_str.data(), static_cast<std::streamsize>(header_str.size()));

  auto write_vector = [&](const Vector& v) {
    out.write(reinterpret_cast<const char*>(v.data()),
              static_cast<std::streamsize>(sizeof(double) * v.size()));
  };
  write_vector(model.priors().lambda_j);
  write_vector(model.priors().nu_j);
  write_vector(model.priors().mu_bar);
  write_vector(model.priors().eta);
  write_vector(model.stats().node_counts);
  write_vector(model.stats().alpha);

  for (const auto& [name, m] : singles) detail::write_payload(out, *m);

  auto write_stack = [&](const std::vector<Matrix>& stack) {
    for (const Matrix& m : stack) detail::write_payload(out, m);
  };
  write_stack(model.params().chol_precision);
  write_stack(model.stats().second_moment);
  for (const auto& st : model.opt_chol()) detail::write_payload(out, st.first_moment());
  for (const auto& st : model.opt_chol()) detail::write_payload(out, st.second_moment());

  if (!out) throw data_error("save_checkpoint: write failed for " + path);
}

inline TilingModel load_checkpoint(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw data_error("load_checkpoint: cannot open " + path);

  char magic[4];
  std::uint32_t version = 0;
  std::uint64_t header_len = 0;
  in.read(magic, 4);
  in.read(reinterpret_cast<char*>(&version), sizeof(version));
  in.read(reinterpret_cast<char*>(&header_len), sizeof(header_len));
  if (!in || std::memcmp(magic, kCheckpointMagic, 4) != 0)
    throw format_error("load_checkpoint: bad magic in " + path);
  if (version != kCheckpointVersion)
    throw format_error("load_checkpoint: unsupported version");
  if (header_len > (1ull << 30)) throw format_error("load_checkpoint: oversized header");

  std::string header_str(header_len, '\0');
  in.read(header_str.data(), static_cast<std::streamsize>(header_len));
  if (!in) throw format_error("load_checkpoint: truncated header");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(header_str);
  } catch (const nlohmann::json::exception&) {
    throw format_error("load_checkpoint: malformed header JSON");
  }

  const Hyperparameters hyper = detail::hyper_from_json(header.at("hyper"));
  const Index n = hyper.num_nodes;
  const Index k = hyper.latent_dim;

  // Seed a structurally valid model, then overwrite every field.
  Matrix dummy = Matrix::Identity(std::max<Index>(hyper.init_buffer, k + 1), k);
  TilingModel model(dummy, hyper);

  auto read_vector = [&](Index size) {
    Vector v(size);
    in.read(reinterpret_cast<char*>(v.data()),
            static_cast<std::streamsize>(sizeof(double) * size));
    if (!in) throw format_error("load_checkpoint: truncated payload");
    return v;
  };
  model.mutable_priors().lambda_j = read_vector(n);
  model.mutable_priors().nu_j = read_vector(n);
  model.mutable_priors().mu_bar = read_vector(k);
  model.mutable_priors().eta = read_vector(k);
  model.mutable_stats().node_counts = read_vector(n);
  model.mutable_stats().alpha = read_vector(n);

  model.mutable_params().mu = detail::read_payload(in, n, k);
  model.mutable_params().logits = detail::read_payload(in, n, n);
  model.mutable_priors().mu0 = detail::read_payload(in, n, k);
  model.mutable_priors().psi = detail::read_payload(in, k, k);
  model.mutable_priors().sigma_bar = detail::read_payload(in, k, k);
  model.mutable_stats().transition_counts = detail::read_payload(in, n, n);
  model.mutable_stats().first_moment = detail::read_payload(in, n, k);
  model.mutable_opt_logits().first_moment() = detail::read_payload(in, n, n);
  model.mutable_opt_logits().second_moment() = detail::read_payload(in, n, n);
  model.mutable_opt_mu().first_moment() = detail::read_payload(in, n, k);
  model.mutable_opt_mu().second_moment() = detail::read_payload(in, n, k);

  auto read_stack = [&](std::vector<Matrix>& stack) {
    stack.resize(static_cast<std::size_t>(n));
    for (Index j = 0; j < n; ++j)
      stack[static_cast<std::size_t>(j)] = detail::read_payload(in, k, k);
  };
  read_stack(model.mutable_params().chol_precision);
  read_stack(model.mutable_stats().second_moment);
  for (Index j = 0; j < n; ++j)
    model.mutable_opt_chol()[static_cast<std::size_t>(j)].first_moment() =
        detail::read_payload(in, k, k);
  for (Index j = 0; j < n; ++j)
    model.mutable_opt_chol()[static_cast<std::size_t>(j)].second_moment() =
        detail::read_payload(in, k, k);

  model.set_steps(header.at("steps").get<long>(), header.at("opt_steps").get<long>());
  model.set_dead_nodes(header.at("dead_nodes").get<std::vector<Index>>());
  std::istringstream rng_state(header.at("rng_state").get<std::string>());
  rng_state >> model.rng();
  model.refresh_caches();
  return model;
}

}  // namespace streamtile
