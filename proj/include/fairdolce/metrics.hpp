#pragma once

// Group fairness metrics over hard predictions, plus the per-task record
// the learner emits.
//
// Ratio metrics follow the min-ratio ("80 percent rule") form: the smaller
// group rate divided by the larger, so 1 is perfectly balanced.  Rates are
// formed from integer counts and the final value is a single division of
// two exact integer products, which keeps results reproducible down to the
// last bit and lets tests compare against counting oracles exactly.

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <vector>

namespace fairdolce {

inline double accuracy(const std::vector<int>& preds,
                       const std::vector<int>& labels) {
  if (preds.size() != labels.size() || preds.empty())
    throw std::invalid_argument("accuracy: bad input sizes");
  size_t correct = 0;
  for (size_t i = 0; i < preds.size(); ++i)
    if (preds[i] == labels[i]) ++correct;
  return static_cast<double>(correct) / static_cast<double>(preds.size());
}

namespace detail {

// min(a/b, c/d) / max(a/b, c/d) for non-negative rates given as count
// fractions, handling the all-zero and one-zero corners.
inline double min_ratio(std::int64_t a, std::int64_t b, std::int64_t c,
                        std::int64_t d) {
  if (a == 0 && c == 0) return 1.0;
  if (a == 0 || c == 0) return 0.0;
  const std::int64_t lhs = a * d;  // a/b vs c/d  <=>  a*d vs c*b
  const std::int64_t rhs = c * b;
  return lhs <= rhs ? static_cast<double>(lhs) / static_cast<double>(rhs)
                    : static_cast<double>(rhs) / static_cast<double>(lhs);
}

}  // namespace detail

// Ratio of positive-prediction rates between sensitive groups.  Empty
// groups make the metric undefined (missing), not zero.
inline std::optional<double> demographic_parity(const std::vector<int>& preds,
                                                const std::vector<int>& sensitive) {
  if (preds.size() != sensitive.size())
    throw std::invalid_argument("demographic_parity: bad input sizes");
  std::int64_t pos_p = 0, n_p = 0, pos_m = 0, n_m = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (sensitive[i] == 1) {
      ++n_p;
      pos_p += preds[i];
    } else {
      ++n_m;
      pos_m += preds[i];
    }
  }
  if (n_p == 0 || n_m == 0) return std::nullopt;
  return detail::min_ratio(pos_p, n_p, pos_m, n_m);
}

// Ratio of true-positive rates between sensitive groups, evaluated on the
// y = 1 subset only.  A group without positives has no true-positive rate,
// so the metric is missing.
inline std::optional<double> equalized_odds(const std::vector<int>& preds,
                                            const std::vector<int>& labels,
                                            const std::vector<int>& sensitive) {
  if (preds.size() != labels.size() || preds.size() != sensitive.size())
    throw std::invalid_argument("equalized_odds: bad input sizes");
  std::int64_t tp_p = 0, n_p = 0, tp_m = 0, n_m = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (labels[i] != 1) continue;
    if (sensitive[i] == 1) {
      ++n_p;
      tp_p += preds[i];
    } else {
      ++n_m;
      tp_m += preds[i];
    }
  }
  if (n_p == 0 || n_m == 0) return std::nullopt;
  return detail::min_ratio(tp_p, n_p, tp_m, n_m);
}

// Absolute difference of positive-prediction rates between groups.
inline std::optional<double> mean_difference(const std::vector<int>& preds,
                                             const std::vector<int>& sensitive) {
  if (preds.size() != sensitive.size())
    throw std::invalid_argument("mean_difference: bad input sizes");
  std::int64_t pos_p = 0, n_p = 0, pos_m = 0, n_m = 0;
  for (size_t i = 0; i < preds.size(); ++i) {
    if (sensitive[i] == 1) {
      ++n_p;
      pos_p += preds[i];
    } else {
      ++n_m;
      pos_m += preds[i];
    }
  }
  if (n_p == 0 || n_m == 0) return std::nullopt;
  const double diff = static_cast<double>(pos_p) / static_cast<double>(n_p) -
                      static_cast<double>(pos_m) / static_cast<double>(n_m);
  return diff < 0 ? -diff : diff;
}

// One row of the prequential evaluation log.  Evaluation fields are
// computed with the parameters from before the task's updates; loss fields
// mirror the last inner iteration and stay unset for the first task, which
// performs no updates.
struct MetricsRecord {
  int timestep = 0;
  int environment = 0;
  double accuracy = 0.0;
  std::optional<double> dp, eo, md;
  double g = 0.0;             // constraint statistic on the task
  bool g_degenerate = false;  // base-rate estimate collapsed; g reported as 0
  std::optional<double> recon, inv, cls, fair, total;
  double lambda1 = 0.0, lambda2 = 0.0, lambda3 = 0.0;
  double cum_violation = 0.0;  // running sum of max(g, 0), nondecreasing
  double preq_loss = 0.0;      // mean cross-entropy under pre-update params
};

// Aggregates over the last ceil(T/3) records.  Ratio metrics average only
// the tasks where they are defined; the missing counts say how many tasks
// were skipped.
struct WindowStats {
  int tasks = 0;
  double accuracy = 0.0;
  std::optional<double> dp, eo, md;
  int dp_missing = 0, eo_missing = 0, md_missing = 0;
  double mean_g = 0.0;
  double cum_violation = 0.0;  // value at the end of the stream
};

inline WindowStats final_window_stats(const std::vector<MetricsRecord>& records) {
  if (records.empty())
    throw std::invalid_argument("final_window_stats: no records");
  const size_t T = records.size();
  const size_t window = (T + 2) / 3;  // ceil(T/3)
  const size_t begin = T - window;
  WindowStats out;
  out.tasks = static_cast<int>(window);
  double acc = 0.0, dp = 0.0, eo = 0.0, md = 0.0, g = 0.0;
  int dp_n = 0, eo_n = 0, md_n = 0;
  for (size_t i = begin; i < T; ++i) {
    const MetricsRecord& r = records[i];
    acc += r.accuracy;
    g += r.g;
    if (r.dp) {
      dp += *r.dp;
      ++dp_n;
    } else {
      ++out.dp_missing;
    }
    if (r.eo) {
      eo += *r.eo;
      ++eo_n;
    } else {
      ++out.eo_missing;
    }
    if (r.md) {
      md += *r.md;
      ++md_n;
    } else {
      ++out.md_missing;
    }
  }
  out.accuracy = acc / static_cast<double>(window);
  out.mean_g = g / static_cast<double>(window);
  if (dp_n > 0) out.dp = dp / dp_n;
  if (eo_n > 0) out.eo = eo / eo_n;
  if (md_n > 0) out.md = md / md_n;
  out.cum_violation = records.back().cum_violation;
  return out;
}

}  // namespace fairdolce
