#pragma once

// Routing rule and the sign-rule threshold adaptation over a rolling window.

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <mutex>
#include <optional>
#include <string>

#include "cdr/errors.hpp"
#include "cdr/routing/policy.hpp"
#include "cdr/strategy.hpp"

namespace cdr::routing {

struct ThresholdSettings {
  double tau0 = 0.5;
  double alpha = 0.01;
  std::size_t window = 100;
  double tau_min = 0.05;
  double tau_max = 0.95;

  void validate() const {
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw InvalidInput("threshold.alpha must be positive");
    if (window == 0) throw InvalidInput("threshold.window must be positive");
    if (!(tau_min <= tau_max)) throw InvalidInput("threshold.tau_min must not exceed threshold.tau_max");
    if (!std::isfinite(tau0) || tau0 < tau_min || tau0 > tau_max)
      throw InvalidInput("threshold.tau0 must lie in [tau_min, tau_max]");
  }
};

struct Outcome {
  Strategy strategy = Strategy::Fast;
  bool correct = false;
  std::optional<bool> counterfactual_correct;  // result of the other strategy, when it was also run
  std::uint64_t tag = 0;
};

struct ThresholdState {
  double tau = 0.5;
  double alpha = 0.01;
  double tau_min = 0.05;
  double tau_max = 0.95;
  std::size_t capacity = 100;
  std::deque<Outcome> window;

  static ThresholdState from(const ThresholdSettings& s) {
    s.validate();
    return ThresholdState{s.tau0, s.alpha, s.tau_min, s.tau_max, s.window, {}};
  }
};

struct RoutingDecision {
  Strategy strategy = Strategy::Fast;
  double score = 0.0;
  double tau_at_decision = 0.0;
  FeatureVector features;
};

// Fast iff score < tau; a tie routes Slow.
inline RoutingDecision route(double score, double tau, const FeatureVector& features) {
  if (!std::isfinite(score)) throw InvalidInput("route: non-finite score");
  return {score < tau ? Strategy::Fast : Strategy::Slow, score, tau, features};
}

inline RoutingDecision route(double score, const ThresholdState& state, const FeatureVector& features) {
  return route(score, state.tau, features);
}

// FIFO ring of the last `capacity` outcomes; tau is untouched.
inline ThresholdState record_outcome(ThresholdState state, const Outcome& outcome) {
  state.window.push_back(outcome);
  while (state.window.size() > state.capacity) state.window.pop_front();
  return state;
}

struct WindowAccuracy {
  std::size_t fast_seen = 0, fast_correct = 0;
  std::size_t slow_seen = 0, slow_correct = 0;
};

// Each record contributes its own strategy's result plus, when present, the
// counterfactual result for the other strategy.
inline WindowAccuracy window_accuracy(const ThresholdState& state) {
  WindowAccuracy a;
  for (const auto& o : state.window) {
    const bool fast_run = o.strategy == Strategy::Fast;
    (fast_run ? a.fast_seen : a.slow_seen)++;
    (fast_run ? a.fast_correct : a.slow_correct) += o.correct;
    if (o.counterfactual_correct) {
      (fast_run ? a.slow_seen : a.fast_seen)++;
      (fast_run ? a.slow_correct : a.fast_correct) += *o.counterfactual_correct;
    }
  }
  return a;
}

inline bool has_evidence(const ThresholdState& state) {
  const auto a = window_accuracy(state);
  return a.fast_seen > 0 && a.slow_seen > 0;
}

// tau <- clamp(tau + alpha * sign(acc_slow - acc_fast)); sign(0) = 0.
inline ThresholdState update_threshold(ThresholdState state) {
  const auto a = window_accuracy(state);
  if (a.fast_seen == 0 || a.slow_seen == 0)
    throw InsufficientEvidence("update_threshold: window lacks observations for " +
                               std::string(a.fast_seen == 0 ? "fast" : "slow") + " strategy");
  // Cross-multiplied so equal accuracies compare exactly.
  const auto lhs = static_cast<unsigned long long>(a.slow_correct) * a.fast_seen;
  const auto rhs = static_cast<unsigned long long>(a.fast_correct) * a.slow_seen;
  const int sign = lhs > rhs ? 1 : (lhs < rhs ? -1 : 0);
  state.tau = std::clamp(state.tau + state.alpha * sign, state.tau_min, state.tau_max);
  return state;
}

// Policy plus adaptive threshold for online use. decide() may run from any
// number of threads against the published tau; observe() is serialised.
class AdaptiveRouter {
 public:
  AdaptiveRouter(Policy policy, ThresholdState state)
      : policy_(std::move(policy)), state_(std::move(state)), tau_(state_.tau) {
    validate(policy_);
  }

  RoutingDecision decide(const FeatureVector& f) const {
    return route(score(policy_, f), tau_.load(std::memory_order_acquire), f);
  }

  // Records the outcome and, once both strategies have evidence, adapts tau.
  void observe(const Outcome& o) {
    std::lock_guard lock(mu_);
    state_ = record_outcome(std::move(state_), o);
    if (has_evidence(state_)) state_ = update_threshold(std::move(state_));
    tau_.store(state_.tau, std::memory_order_release);
  }

  double tau() const noexcept { return tau_.load(std::memory_order_acquire); }

  ThresholdState snapshot() const {
    std::lock_guard lock(mu_);
    return state_;
  }

  const Policy& policy() const noexcept { return policy_; }

 private:
  Policy policy_;
  mutable std::mutex mu_;
  ThresholdState state_;
  std::atomic<double> tau_;
};

}  // namespace cdr::routing
