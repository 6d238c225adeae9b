#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "cdr/errors.hpp"
#include "cdr/numeric/linalg.hpp"
#include "cdr/random.hpp"
#include "cdr/strategy.hpp"

namespace cdr::bench {

struct RunMetrics {
  double accuracy = 0.0;
  double consistency = 0.0;
  double mean_tokens = 0.0;
  double mean_latency_s = 0.0;
  double ece = 0.0;
  double fast_fraction = 0.0;
};

struct ConfusionCell {
  double routing_accuracy = 0.0;
  double false_positive_rate = 0.0;  // routed slow, oracle fast
  double false_negative_rate = 0.0;  // routed fast, oracle slow
  std::size_t count = 0;
};

struct ConfusionReport {
  double routing_accuracy = 0.0;
  double false_positive_rate = 0.0;
  double false_negative_rate = 0.0;
  std::map<std::string, ConfusionCell> per_category;
};

// Mean over queries of the fraction of agreeing run pairs:
// sum_a C(count_a, 2) / C(repeats, 2).
inline double consistency(const std::vector<std::vector<std::uint64_t>>& answers) {
  if (answers.empty()) throw InvalidInput("consistency: no queries");
  numeric::CompensatedSum total;
  for (const auto& runs : answers) {
    if (runs.size() < 2) throw InvalidInput("consistency: need at least two runs per query");
    std::map<std::uint64_t, std::uint64_t> counts;
    for (auto a : runs) ++counts[a];
    std::uint64_t agreeing = 0;
    for (const auto& [answer, c] : counts) agreeing += c * (c - 1) / 2;
    const std::uint64_t pairs = runs.size() * (runs.size() - 1) / 2;
    total.add(static_cast<double>(agreeing) / static_cast<double>(pairs));
  }
  return total.value() / static_cast<double>(answers.size());
}

// Equal-width bins over [0,1]; confidence 1.0 lands in the last bin.
inline double calibration_ece(std::span<const double> confidences, std::span<const bool> correct, std::size_t bins = 10) {
  if (confidences.size() != correct.size()) throw InvalidInput("calibration_ece: length mismatch");
  if (bins == 0) throw InvalidInput("calibration_ece: bins must be positive");
  if (confidences.empty()) return 0.0;
  std::vector<double> conf_sum(bins, 0.0), hit_sum(bins, 0.0);
  std::vector<std::size_t> count(bins, 0);
  for (std::size_t i = 0; i < confidences.size(); ++i) {
    const double c = confidences[i];
    if (!(c >= 0.0 && c <= 1.0)) throw InvalidInput("calibration_ece: confidence outside [0,1]");
    const auto b = std::min(bins - 1, static_cast<std::size_t>(c * static_cast<double>(bins)));
    conf_sum[b] += c;
    hit_sum[b] += correct[i] ? 1.0 : 0.0;
    ++count[b];
  }
  const double n = static_cast<double>(confidences.size());
  double ece = 0.0;
  for (std::size_t b = 0; b < bins; ++b) {
    if (count[b] == 0) continue;
    const double k = static_cast<double>(count[b]);
    ece += (k / n) * std::fabs(conf_sum[b] / k - hit_sum[b] / k);
  }
  return ece;
}

namespace detail {

// Moves one component by a few ulps so that r[0] + r[1] + r[2] == 1 holds
// exactly in left-to-right order. Only the last addend controls the final
// rounding finely, so each component is tried in turn, nearest value first.
inline void settle_unit_sum(std::array<double, 3>& r) {
  const auto sum = [](const std::array<double, 3>& c) { return c[0] + c[1] + c[2]; };
  if (sum(r) == 1.0) return;
  for (std::size_t k = 0; k < 3; ++k) {
    for (const double start : {r[k], r[k] + (1.0 - sum(r))}) {
      auto c = r;
      double up = start, down = start;
      for (int step = 0; step <= 16; ++step) {
        for (const double v : {up, down}) {
          c[k] = v;
          if (v >= 0.0 && v <= 1.0 && sum(c) == 1.0) {
            r = c;
            return;
          }
        }
        up = std::nextafter(up, 2.0);
        down = std::nextafter(down, -1.0);
      }
    }
  }
}

inline ConfusionCell confusion_counts(std::size_t match, std::size_t fp, std::size_t fn) {
  ConfusionCell c;
  c.count = match + fp + fn;
  if (c.count == 0) return c;
  const double n = static_cast<double>(c.count);
  std::array<double, 3> r{static_cast<double>(match) / n, static_cast<double>(fp) / n, static_cast<double>(fn) / n};
  settle_unit_sum(r);
  c.routing_accuracy = r[0];
  c.false_positive_rate = r[1];
  c.false_negative_rate = r[2];
  return c;
}

}  // namespace detail

// Categories are optional; when given they must align with the decisions.
inline ConfusionReport routing_confusion(std::span<const Strategy> decisions, std::span<const Strategy> oracle,
                                         std::span<const std::string> categories = {}) {
  if (decisions.size() != oracle.size()) throw InvalidInput("routing_confusion: length mismatch");
  if (!categories.empty() && categories.size() != decisions.size())
    throw InvalidInput("routing_confusion: category length mismatch");
  std::size_t match = 0, fp = 0, fn = 0;
  std::map<std::string, std::array<std::size_t, 3>> per;
  for (std::size_t i = 0; i < decisions.size(); ++i) {
    const std::size_t kind = decisions[i] == oracle[i] ? 0 : (decisions[i] == Strategy::Slow ? 1 : 2);
    (kind == 0 ? match : kind == 1 ? fp : fn)++;
    if (!categories.empty()) ++per[categories[i]][kind];
  }
  const auto all = detail::confusion_counts(match, fp, fn);
  ConfusionReport r{all.routing_accuracy, all.false_positive_rate, all.false_negative_rate, {}};
  for (const auto& [cat, k] : per) r.per_category[cat] = detail::confusion_counts(k[0], k[1], k[2]);
  return r;
}

struct Interval {
  double low = 0.0;
  double high = 0.0;
  bool excludes_zero() const noexcept { return low > 0.0 || high < 0.0; }
};

// Linear-interpolated quantile of sorted values.
inline double quantile_sorted(std::span<const double> sorted, double q) {
  if (sorted.empty()) throw InvalidInput("quantile of empty sequence");
  const double pos = q * static_cast<double>(sorted.size() - 1);
  const auto lo = static_cast<std::size_t>(std::floor(pos));
  const auto hi = std::min(sorted.size() - 1, lo + 1);
  return sorted[lo] + (pos - static_cast<double>(lo)) * (sorted[hi] - sorted[lo]);
}

// Resamples query indices with replacement; every series evaluated through
// the same object sees the same resampled indices (paired design).
class PairedBootstrap {
 public:
  PairedBootstrap(std::size_t n, std::size_t resamples, std::uint64_t seed)
      : n_(n), resamples_(resamples), seed_(seed) {
    if (n == 0) throw InvalidInput("bootstrap: no observations");
    if (resamples == 0) throw InvalidInput("bootstrap: need at least one resample");
  }

  std::size_t resamples() const noexcept { return resamples_; }

  // result[s][b] is the mean of series s under resample b.
  std::vector<std::vector<double>> resampled_means(const std::vector<std::span<const double>>& series) const {
    for (const auto& s : series)
      if (s.size() != n_) throw InvalidInput("bootstrap: series length mismatch");
    std::vector<std::vector<double>> out(series.size(), std::vector<double>(resamples_));
    std::vector<std::uint32_t> weight(n_);
    for (std::size_t b = 0; b < resamples_; ++b) {
      std::fill(weight.begin(), weight.end(), 0);
      CounterRng rng(seed_, {0xb007, b});
      for (std::size_t k = 0; k < n_; ++k) ++weight[rng.below(n_)];
      for (std::size_t s = 0; s < series.size(); ++s) {
        double sum = 0.0;
        for (std::size_t k = 0; k < n_; ++k) sum += static_cast<double>(weight[k]) * series[s][k];
        out[s][b] = sum / static_cast<double>(n_);
      }
    }
    return out;
  }

  static Interval percentile_interval(std::vector<double> stats, double level = 0.95) {
    std::sort(stats.begin(), stats.end());
    const double tail = (1.0 - level) / 2.0;
    return {quantile_sorted(stats, tail), quantile_sorted(stats, 1.0 - tail)};
  }

  Interval mean_interval(std::span<const double> series, double level = 0.95) const {
    return percentile_interval(std::move(resampled_means({series})[0]), level);
  }

  Interval difference_interval(std::span<const double> a, std::span<const double> b, double level = 0.95) const {
    auto m = resampled_means({a, b});
    for (std::size_t i = 0; i < resamples_; ++i) m[0][i] -= m[1][i];
    return percentile_interval(std::move(m[0]), level);
  }

  // 1 - mean(a) / mean(b)
  Interval savings_interval(std::span<const double> a, std::span<const double> b, double level = 0.95) const {
    auto m = resampled_means({a, b});
    for (std::size_t i = 0; i < resamples_; ++i) m[0][i] = 1.0 - m[0][i] / m[1][i];
    return percentile_interval(std::move(m[0]), level);
  }

 private:
  std::size_t n_;
  std::size_t resamples_;
  std::uint64_t seed_;
};

}  // namespace cdr::bench
