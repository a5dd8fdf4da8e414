#pragma once

#include <nlohmann/json_fwd.hpp>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <string>
#include <vector>

#include "streamtile/core.hpp"

#include <nlohmann/json.hpp>

namespace streamtile {

// One scored prediction: observation at stream index t, scored T steps ahead
// of the snapshot that produced it. Times are seconds.
struct MetricsRecord {
  long t = 0;
  Index horizon = 0;  // T
  double log_pred_prob = 0.0;
  double entropy_nats = 0.0;
  double entropy_bits = 0.0;
  double learn_time = 0.0;
  double predict_time = 0.0;
  double baseline_log_pred_prob = 0.0;
};

struct SummaryStat {
  std::size_t count = 0;
  double mean = 0.0;
  double stddev = 0.0;
};

inline SummaryStat summarize(const std::vector<double>& xs) {
  SummaryStat s;
  s.count = xs.size();
  if (xs.empty()) return s;
  double sum = 0.0;
  for (double x : xs) sum += x;
  s.mean = sum / static_cast<double>(xs.size());
  if (xs.size() > 1) {
    double ss = 0.0;
    for (double x : xs) ss += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(ss / static_cast<double>(xs.size() - 1));
  }
  return s;
}

struct HorizonSummary {
  Index horizon = 0;
  SummaryStat log_pred_prob;
  SummaryStat entropy_nats;
  SummaryStat entropy_bits;
  SummaryStat baseline_log_pred_prob;
  double mean_excess_over_baseline = 0.0;
};

struct EvalSummary {
  long total_steps = 0;
  long last_half_start = 0;
  std::vector<HorizonSummary> per_horizon;
};

class MetricsSeries {
 public:
  void add(const MetricsRecord& r) { records_.push_back(r); }
  const std::vector<MetricsRecord>& records() const { return records_; }
  std::size_t size() const { return records_.size(); }

  // Mean/std per horizon over the last half of the stream: records whose
  // scored index t falls at or after total_steps / 2.
  EvalSummary summarize_last_half(long total_steps) const {
    EvalSummary summary;
    summary.total_steps = total_steps;
    summary.last_half_start = total_steps / 2;

    std::vector<Index> horizons;
    for (const auto& r : records_) {
      bool seen = false;
      for (Index h : horizons) seen = seen || (h == r.horizon);
      if (!seen) horizons.push_back(r.horizon);
    }
    std::sort(horizons.begin(), horizons.end());

    for (Index h : horizons) {
      HorizonSummary hs;
      hs.horizon = h;
      std::vector<double> lp, en, eb, bl;
      for (const auto& r : records_) {
        if (r.horizon != h || r.t < summary.last_half_start) continue;
        lp.push_back(r.log_pred_prob);
        en.push_back(r.entropy_nats);
        eb.push_back(r.entropy_bits);
        bl.push_back(r.baseline_log_pred_prob);
      }
      hs.log_pred_prob = summarize(lp);
      hs.entropy_nats = summarize(en);
      hs.entropy_bits = summarize(eb);
      hs.baseline_log_pred_prob = summarize(bl);
      hs.mean_excess_over_baseline = hs.log_pred_prob.mean - hs.baseline_log_pred_prob.mean;
      summary.per_horizon.push_back(hs);
    }
    return summary;
  }

  void write_csv(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("MetricsSeries: cannot open " + path);
    out << "t,T,log_pred_prob,entropy_nats,entropy_bits,learn_time,predict_time,"
           "baseline_log_pred_prob\n";
    char buf[512];
    for (const auto& r : records_) {
      std::snprintf(buf, sizeof(buf),
                    "%ld,%ld,%.17g,%.17g,%.17g,%.17g,%.17g,%.17g\n", r.t,
                    static_cast<long>(r.horizon), r.log_pred_prob, r.entropy_nats,
                    r.entropy_bits, r.learn_time, r.predict_time,
                    r.baseline_log_pred_prob);
      out << buf;
    }
  }

  void write_jsonl(const std::string& path) const {
    std::ofstream out(path);
    if (!out) throw data_error("MetricsSeries: cannot open " + path);
    for (const auto& r : records_) {
      nlohmann::json j{{"t", r.t},
                       {"T", r.horizon},
                       {"log_pred_prob", r.log_pred_prob},
                       {"entropy_nats", r.entropy_nats},
                       {"entropy_bits", r.entropy_bits},
                       {"learn_time", r.learn_time},
                       {"predict_time", r.predict_time},
                       {"baseline_log_pred_prob", r.baseline_log_pred_prob}};
      out << j.dump() << "\n";
    }
  }

  static MetricsSeries read_csv(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw data_error("MetricsSeries: cannot open " + path);
    MetricsSeries series;
    std::string line;
    if (!std::getline(in, line)) throw format_error("MetricsSeries: empty csv");
    while (std::getline(in, line)) {
      if (line.empty()) continue;
      MetricsRecord r;
      long horizon = 0;
      const int got = std::sscanf(line.c_str(), "%ld,%ld,%lg,%lg,%lg,%lg,%lg,%lg",
                                  &r.t, &horizon, &r.log_pred_prob, &r.entropy_nats,
                                  &r.entropy_bits, &r.learn_time, &r.predict_time,
                                  &r.baseline_log_pred_prob);
      if (got != 8) throw format_error("MetricsSeries: malformed csv row");
      r.horizon = horizon;
      series.add(r);
    }
    return series;
  }

 private:
  std::vector<MetricsRecord> records_;
};

inline nlohmann::json to_json(const SummaryStat& s) {
  return {{"count", s.count}, {"mean", s.mean}, {"std", s.stddev}};
}

inline nlohmann::json to_json(const EvalSummary& s) {
  nlohmann::json per = nlohmann::json::array();
  for (const auto& h : s.per_horizon) {
    per.push_back({{"T", h.horizon},
                   {"log_pred_prob", to_json(h.log_pred_prob)},
                   {"entropy_nats", to_json(h.entropy_nats)},
                   {"entropy_bits", to_json(h.entropy_bits)},
                   {"baseline_log_pred_prob", to_json(h.baseline_log_pred_prob)},
                   {"mean_excess_over_baseline", h.mean_excess_over_baseline}});
  }
  return {{"total_steps", s.total_steps},
          {"last_half_start", s.last_half_start},
          {"per_horizon", per}};
}

}  // namespace streamtile
