#pragma once

#include <Eigen/Dense>

#include <deque>
#include <memory>
#include <vector>

#include "streamtile/core.hpp"
#include "streamtile/metrics.hpp"
#include "streamtile/model.hpp"
#include "streamtile/predict.hpp"

namespace streamtile {

// Mixture density parameters shared between consecutive predictions; the
// learner republishes only when an M-step actually changes them.
struct DensityParams {
  Matrix mu;
  std::vector<Matrix> chol_precision;
  Vector log_det_half;
};

// Predictions issued at one time step for a set of horizons: occupancy
// weights per horizon plus the (shared, immutable) density parameters.
struct PredictionSet {
  std::vector<Index> horizons;
  std::vector<Vector> weights;
  std::shared_ptr<const DensityParams> density;

  double log_pdf(std::size_t idx, const Vector& x) const {
    return mixture_log_pdf(weights[idx], density->mu, density->chol_precision,
                           density->log_det_half, x);
  }
  EntropyValue entropy(std::size_t idx) const { return entropy_of(weights[idx]); }
};

// Learner adapter over a TilingModel handling buffered initialization and
// amortized M-steps. Satisfies the eval_stream learner interface:
//   Vector observe(const Vector&, PhaseTimings*);  bool ready();
//   Index warmup();  PredictionSet predict(const std::vector<Index>&).
class ModelLearner {
 public:
  explicit ModelLearner(Hyperparameters hyper) : hyper_(hyper) { hyper_.validate(); }

  bool ready() const { return model_ != nullptr; }
  Index warmup() const { return hyper_.init_buffer; }

  TilingModel& model() { return *model_; }
  const TilingModel& model() const { return *model_; }

  // Start from an existing model instead of buffering an init window.
  void adopt(std::unique_ptr<TilingModel> model) {
    model_ = std::move(model);
    buffer_.clear();
  }

  // Consume one sample; returns the model-space representation (identity
  // here; reduction pipelines transform before delegating). Empty while the
  // init buffer is still filling counts as ready()==false.
  Vector observe(const Vector& x, PhaseTimings* timings = nullptr) {
    if (!model_) {
      buffer_.push_back(x);
      if (static_cast<Index>(buffer_.size()) >= hyper_.init_buffer) {
        Matrix buf(static_cast<Index>(buffer_.size()), hyper_.latent_dim);
        for (std::size_t i = 0; i < buffer_.size(); ++i)
          buf.row(static_cast<Index>(i)) = buffer_[i].transpose();
        model_ = std::make_unique<TilingModel>(buf, hyper_);
        buffer_.clear();
      }
      return x;
    }
    Matrix col = x;
    model_->observe_batch(col, hyper_.batch_period, timings);
    return x;
  }

  PredictionSet predict(const std::vector<Index>& horizons) const {
    PredictionSet out;
    out.horizons = horizons;
    out.density = current_density();
    Index max_h = 0;
    for (Index h : horizons) max_h = std::max(max_h, h);
    Vector w = model_->stats().alpha;
    out.weights.resize(horizons.size());
    for (std::size_t i = 0; i < horizons.size(); ++i)
      if (horizons[i] == 0) out.weights[i] = w;
    for (Index step = 1; step <= max_h; ++step) {
      w = model_->transition().transpose() * w;
      for (std::size_t i = 0; i < horizons.size(); ++i)
        if (horizons[i] == step) out.weights[i] = w;
    }
    return out;
  }

 private:
  std::shared_ptr<const DensityParams> current_density() const {
    if (!density_ || density_version_ != model_->opt_steps()) {
      auto d = std::make_shared<DensityParams>();
      d->mu = model_->params().mu;
      d->chol_precision = model_->params().chol_precision;
      const Index n = model_->hyper().num_nodes;
      const Index k = model_->hyper().latent_dim;
      d->log_det_half.resize(n);
      for (Index j = 0; j < n; ++j) {
        double s = 0.0;
        for (Index i = 0; i < k; ++i)
          s += std::log(
              model_->params().chol_precision[static_cast<std::size_t>(j)](i, i));
        d->log_det_half[j] = s;
      }
      density_ = d;
      density_version_ = model_->opt_steps();
    }
    return density_;
  }

  Hyperparameters hyper_;
  std::unique_ptr<TilingModel> model_;
  std::vector<Vector> buffer_;
  mutable std::shared_ptr<const DensityParams> density_;
  mutable long density_version_ = -1;
};

struct EvalResult {
  MetricsSeries series;
  EvalSummary summary;
  long total_steps = 0;
  std::vector<double> learn_times;    // per sample, seconds
  std::vector<double> predict_times;  // per prediction step, seconds
};

// Strictly causal streaming evaluation: at each step the learner first
// consumes x_t, then issues predictions for every requested horizon; the
// prediction for horizon T is scored when x_{t+T} is realized and recorded
// under the scored index t+T. A random-walk diffusion anchored at x_t
// (variance smoothed from one-step residuals) is scored alongside as the
// reference. Summaries cover the last half of the stream.
template <class Learner>
EvalResult eval_stream(Learner& learner, const Matrix& data_cols,
                       const std::vector<Index>& horizons,
                       PhaseTimings* phases = nullptr) {
  require(!horizons.empty(), "eval_stream: no horizons");
  Index max_h = 0;
  for (Index h : horizons) {
    require(h >= 1, "eval_stream: horizons must be >= 1");
    max_h = std::max(max_h, h);
  }
  const long total = data_cols.cols();
  if (total < 2 * max_h + learner.warmup())
    throw insufficient_data_error("eval_stream: stream shorter than 2*max(T) + warmup");

  struct Pending {
    long target = 0;
    std::size_t horizon_idx = 0;
    PredictionSet prediction;
    EntropyValue entropy;
    double predict_time = 0.0;
    Vector anchor;  // model-space point the prediction was issued from
    double rw_sigma2 = 0.0;
  };

  EvalResult result;
  result.total_steps = total;
  result.learn_times.reserve(static_cast<std::size_t>(total));
  RandomWalkBaseline baseline;
  std::deque<Pending> pending;

  for (long t = 0; t < total; ++t) {
    detail::StopWatch learn_watch;
    const Vector embedded = learner.observe(data_cols.col(t), phases);
    const double learn_time = learn_watch.seconds();
    result.learn_times.push_back(learn_time);

    if (embedded.size() == 0) continue;  // reduction stage still warming up

    baseline.observe(embedded);

    while (!pending.empty() && pending.front().target <= t) {
      Pending& p = pending.front();
      if (p.target == t) {
        MetricsRecord r;
        r.t = t;
        r.horizon = horizons[p.horizon_idx];
        r.log_pred_prob = p.prediction.log_pdf(p.horizon_idx, embedded);
        r.entropy_nats = p.entropy.nats;
        r.entropy_bits = p.entropy.bits;
        r.learn_time = learn_time;
        r.predict_time = p.predict_time;
        r.baseline_log_pred_prob =
            random_walk_log_pdf(p.rw_sigma2, p.anchor, embedded, r.horizon);
        result.series.add(r);
      }
      pending.pop_front();
    }

    if (!learner.ready()) continue;

    detail::StopWatch predict_watch;
    PredictionSet preds = learner.predict(horizons);
    const double predict_time = predict_watch.seconds();
    result.predict_times.push_back(predict_time);

    for (std::size_t i = 0; i < horizons.size(); ++i) {
      const long target = t + horizons[i];
      if (target >= total) continue;
      Pending p;
      p.target = target;
      p.horizon_idx = i;
      p.entropy = preds.entropy(i);
      p.prediction = preds;
      p.predict_time = predict_time;
      p.anchor = embedded;
      p.rw_sigma2 = baseline.sigma2();
      pending.push_back(std::move(p));
    }
    std::sort(pending.begin(), pending.end(), [](const Pending& a, const Pending& b) {
      return a.target != b.target ? a.target < b.target : a.horizon_idx < b.horizon_idx;
    });
  }

  result.summary = result.series.summarize_last_half(total);
  return result;
}

}  // namespace streamtile
