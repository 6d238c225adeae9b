#pragma once

// Simulated fast and slow reasoning engines. Accuracy depends only on the
// query's latent complexity; token and latency costs are truncated normals.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cdr/errors.hpp"
#include "cdr/features.hpp"
#include "cdr/random.hpp"
#include "cdr/strategy.hpp"

namespace cdr::engines {

// Piecewise-linear accuracy over latent complexity z in [0,1], flat beyond the end points.
struct AccuracyCurve {
  std::vector<std::pair<double, double>> points;  // (z, accuracy), z strictly increasing

  double at(double z) const {
    if (points.empty()) throw InvalidInput("accuracy: curve has no control points");
    if (z <= points.front().first) return points.front().second;
    if (z >= points.back().first) return points.back().second;
    const auto hi = std::upper_bound(points.begin(), points.end(), z,
                                     [](double v, const auto& p) { return v < p.first; });
    const auto lo = hi - 1;
    const double t = (z - lo->first) / (hi->first - lo->first);
    return lo->second + t * (hi->second - lo->second);
  }

  void validate() const {
    if (points.empty()) throw InvalidInput("accuracy: curve has no control points");
    for (std::size_t i = 0; i < points.size(); ++i) {
      const auto [z, a] = points[i];
      if (!(z >= 0.0 && z <= 1.0)) throw InvalidInput("accuracy: z outside [0,1]");
      if (!(a >= 0.0 && a <= 1.0)) throw InvalidInput("accuracy: value outside [0,1]");
      if (i > 0 && !(z > points[i - 1].first)) throw InvalidInput("accuracy: z must be strictly increasing");
    }
  }

  bool operator==(const AccuracyCurve&) const = default;
};

struct NormalCost {
  double mean = 1.0;
  double stddev = 0.0;
  bool operator==(const NormalCost&) const = default;
};

inline constexpr std::array<const char*, 4> kSlowStages = {"decomposition", "dimension_evaluation", "synthesis",
                                                           "confidence_estimation"};

struct EngineProfile {
  Strategy kind = Strategy::Fast;
  AccuracyCurve accuracy;
  NormalCost tokens;
  NormalCost latency_s;
  std::array<double, 4> stage_fractions{0.25, 0.25, 0.25, 0.25};  // slow only
  double confidence_noise = 0.1;

  double mean_tokens() const noexcept { return tokens.mean; }

  void validate() const {
    accuracy.validate();
    if (!(tokens.mean > 0.0) || !(tokens.stddev >= 0.0)) throw InvalidInput("tokens: mean must be > 0 and std >= 0");
    if (!(latency_s.mean > 0.0) || !(latency_s.stddev >= 0.0)) throw InvalidInput("latency_s: mean must be > 0 and std >= 0");
    if (!(confidence_noise >= 0.0)) throw InvalidInput("confidence_noise: must be >= 0");
    if (kind == Strategy::Slow) {
      double s = 0.0;
      for (double f : stage_fractions) {
        if (!(f >= 0.0)) throw InvalidInput("stage_fractions: negative fraction");
        s += f;
      }
      if (std::fabs(s - 1.0) > 1e-9) throw InvalidInput("stage_fractions: must sum to 1");
    }
  }

  // Direct generation: cheap, accurate on easy queries, degrading with complexity.
  static EngineProfile default_fast() {
    EngineProfile p;
    p.kind = Strategy::Fast;
    p.accuracy.points = {{0.0, 0.90}, {0.55, 0.76}, {1.0, 0.20}};
    p.tokens = {145.0, 23.0};
    p.latency_s = {1.2, 0.3};
    return p;
  }

  // Four-stage structured pipeline: costly, nearly flat accuracy across complexity.
  static EngineProfile default_slow() {
    EngineProfile p;
    p.kind = Strategy::Slow;
    p.accuracy.points = {{0.0, 0.80}, {0.55, 0.78}, {1.0, 0.78}};
    p.tokens = {342.0, 45.0};
    p.latency_s = {3.8, 0.7};
    p.stage_fractions = {0.15, 0.45, 0.25, 0.15};
    return p;
  }

  bool operator==(const EngineProfile&) const = default;
};

struct SimulatedQuery {
  features::QueryRecord record;
  std::string category;
  double latent_complexity = 0.0;
  std::uint64_t n_options = 4;
  std::optional<Strategy> oracle_label;

  bool operator==(const SimulatedQuery&) const = default;
};

struct EngineResponse {
  bool correct = false;
  std::uint64_t answer = 0;  // 0 is the true answer; wrong answers are 1..n_options-1
  std::uint64_t tokens = 1;
  double latency_s = 0.0;
  double confidence = 0.0;
  std::optional<std::array<std::uint64_t, 4>> stage_trace;
};

struct UtilityConfig {
  double lambda_cost = 0.1;  // utility = accuracy - lambda * tokens / 1000

  void validate() const {
    if (!(lambda_cost >= 0.0) || !std::isfinite(lambda_cost)) throw InvalidInput("utility.lambda_cost must be >= 0");
  }
};

// Splits `total` by cumulative rounding so the parts always sum to it.
inline std::array<std::uint64_t, 4> split_stages(std::uint64_t total, const std::array<double, 4>& fractions) {
  std::array<std::uint64_t, 4> out{};
  double cum = 0.0;
  std::uint64_t assigned = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    cum += fractions[i];
    const std::uint64_t upto =
        i == 3 ? total : std::min<std::uint64_t>(total, static_cast<std::uint64_t>(std::llround(cum * double(total))));
    out[i] = upto >= assigned ? upto - assigned : 0;
    assigned += out[i];
  }
  return out;
}

// Draw order is fixed: correctness, tokens, latency, confidence, wrong answer.
inline EngineResponse respond(const EngineProfile& profile, const SimulatedQuery& query, CounterRng stream) {
  const double acc = profile.accuracy.at(query.latent_complexity);
  EngineResponse r;
  r.correct = stream.uniform() < acc;
  r.tokens = static_cast<std::uint64_t>(std::llround(std::max(1.0, stream.normal(profile.tokens.mean, profile.tokens.stddev))));
  r.latency_s = std::max(1e-3, stream.normal(profile.latency_s.mean, profile.latency_s.stddev));
  const double noise = stream.uniform(-profile.confidence_noise, profile.confidence_noise);
  r.confidence = std::clamp(acc + noise, 0.0, 1.0);
  const std::uint64_t wrong_choices = query.n_options > 1 ? query.n_options - 1 : 1;
  const std::uint64_t wrong = 1 + stream.below(wrong_choices);
  r.answer = r.correct ? 0 : wrong;
  if (profile.kind == Strategy::Slow) r.stage_trace = split_stages(r.tokens, profile.stage_fractions);
  return r;
}

inline double expected_utility(const EngineProfile& p, double z, const UtilityConfig& util) {
  return p.accuracy.at(z) - util.lambda_cost * p.mean_tokens() / 1000.0;
}

// Retrospective best strategy; ties go to Fast.
inline Strategy oracle_best_strategy(const SimulatedQuery& query, const EngineProfile& fast, const EngineProfile& slow,
                                     const UtilityConfig& util) {
  const double z = query.latent_complexity;
  return expected_utility(fast, z, util) >= expected_utility(slow, z, util) ? Strategy::Fast : Strategy::Slow;
}

}  // namespace cdr::engines
