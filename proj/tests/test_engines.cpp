#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <thread>
#include <vector>

#include "cdr/engines.hpp"
#include "cdr/errors.hpp"
#include "cdr/random.hpp"

using namespace cdr;
using namespace cdr::engines;

namespace {

SimulatedQuery query_at(double z) {
  SimulatedQuery q;
  q.record.id = "q";
  q.latent_complexity = z;
  q.n_options = 4;
  return q;
}

EngineProfile flat_profile(Strategy kind, double acc, double tokens) {
  EngineProfile p = kind == Strategy::Fast ? EngineProfile::default_fast() : EngineProfile::default_slow();
  p.accuracy.points = {{0.0, acc}};
  p.tokens = {tokens, 0.0};
  p.latency_s = {1.0, 0.0};
  return p;
}

double mean_tokens(const EngineProfile& p, std::size_t n, std::uint64_t seed) {
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) total += static_cast<double>(respond(p, query_at(0.5), CounterRng(seed, {i})).tokens);
  return total / static_cast<double>(n);
}

}  // namespace

TEST(AccuracyCurve, InterpolatesAndClamps) {
  const AccuracyCurve c{{{0.0, 0.9}, {0.5, 0.7}, {1.0, 0.2}}};
  EXPECT_DOUBLE_EQ(c.at(0.0), 0.9);
  EXPECT_DOUBLE_EQ(c.at(0.25), 0.8);
  EXPECT_DOUBLE_EQ(c.at(0.75), 0.45);
  EXPECT_DOUBLE_EQ(c.at(1.0), 0.2);
  EXPECT_DOUBLE_EQ(c.at(-1.0), 0.9);
  EXPECT_DOUBLE_EQ(c.at(2.0), 0.2);
}

TEST(AccuracyCurve, Validation) {
  EXPECT_THROW((AccuracyCurve{}).validate(), InvalidInput);
  EXPECT_THROW((AccuracyCurve{{{0.5, 0.9}, {0.5, 0.7}}}).validate(), InvalidInput);
  EXPECT_THROW((AccuracyCurve{{{0.0, 1.2}}}).validate(), InvalidInput);
  EXPECT_THROW((AccuracyCurve{{{1.5, 0.2}}}).validate(), InvalidInput);
}

TEST(EngineProfile, DefaultsAreValid) {
  EXPECT_NO_THROW(EngineProfile::default_fast().validate());
  EXPECT_NO_THROW(EngineProfile::default_slow().validate());
  auto p = EngineProfile::default_slow();
  p.stage_fractions = {0.3, 0.3, 0.3, 0.3};
  EXPECT_THROW(p.validate(), InvalidInput);
  p = EngineProfile::default_fast();
  p.tokens.mean = 0.0;
  EXPECT_THROW(p.validate(), InvalidInput);
}

TEST(Respond, DegenerateProfileIsExact) {
  const auto p = flat_profile(Strategy::Fast, 1.0, 200.0);
  for (std::uint64_t i = 0; i < 1000; ++i) {
    const auto r = respond(p, query_at(0.3), CounterRng(1, {i}));
    ASSERT_TRUE(r.correct);
    ASSERT_EQ(r.answer, 0u);
    ASSERT_EQ(r.tokens, 200u);
    ASSERT_EQ(r.latency_s, 1.0);
    ASSERT_GE(r.confidence, 0.0);
    ASSERT_LE(r.confidence, 1.0);
    ASSERT_FALSE(r.stage_trace.has_value());
  }
}

TEST(Respond, ZeroAccuracyGivesWrongAnswers) {
  const auto p = flat_profile(Strategy::Fast, 0.0, 50.0);
  for (std::uint64_t i = 0; i < 200; ++i) {
    const auto r = respond(p, query_at(0.3), CounterRng(2, {i}));
    ASSERT_FALSE(r.correct);
    ASSERT_GE(r.answer, 1u);
    ASSERT_LE(r.answer, 3u);
  }
}

TEST(Respond, DefaultFastMeanTokens) {
  EXPECT_NEAR(mean_tokens(EngineProfile::default_fast(), 10000, 42), 145.0, 0.02 * 145.0);
}

TEST(Respond, DefaultSlowMeanTokens) {
  EXPECT_NEAR(mean_tokens(EngineProfile::default_slow(), 10000, 42), 342.0, 0.02 * 342.0);
}

TEST(Respond, EmpiricalAccuracyFollowsCurve) {
  const auto p = EngineProfile::default_fast();
  for (double z : {0.1, 0.55, 0.9}) {
    std::size_t ok = 0;
    const std::size_t n = 20000;
    for (std::size_t i = 0; i < n; ++i) ok += respond(p, query_at(z), CounterRng(3, {i})).correct;
    const double acc = p.accuracy.at(z);
    const double se = std::sqrt(acc * (1 - acc) / static_cast<double>(n));
    EXPECT_NEAR(static_cast<double>(ok) / static_cast<double>(n), acc, 4 * se) << "z=" << z;
  }
}

TEST(Respond, SlowStageTraceSumsToTokens) {
  const auto p = EngineProfile::default_slow();
  for (std::uint64_t i = 0; i < 5000; ++i) {
    const auto r = respond(p, query_at(0.7), CounterRng(4, {i}));
    ASSERT_TRUE(r.stage_trace.has_value());
    const auto& t = *r.stage_trace;
    ASSERT_EQ(std::accumulate(t.begin(), t.end(), std::uint64_t{0}), r.tokens);
  }
}

TEST(SplitStages, AlwaysSumsToTotal) {
  CounterRng rng(5, {1});
  for (std::uint64_t total = 1; total < 2000; total += 7) {
    std::array<double, 4> f{rng.uniform(), rng.uniform(), rng.uniform(), rng.uniform()};
    const double s = f[0] + f[1] + f[2] + f[3];
    for (auto& v : f) v /= s;
    const auto parts = split_stages(total, f);
    ASSERT_EQ(parts[0] + parts[1] + parts[2] + parts[3], total);
  }
  EXPECT_EQ(split_stages(100, {0.15, 0.45, 0.25, 0.15}), (std::array<std::uint64_t, 4>{15, 45, 25, 15}));
}

TEST(Respond, DeterministicPerStreamAndOrderFree) {
  const auto p = EngineProfile::default_slow();
  std::vector<EngineResponse> seq(256), par(256);
  for (std::uint64_t i = 0; i < 256; ++i) seq[i] = respond(p, query_at(0.4), CounterRng(6, {i}));
  std::vector<std::thread> threads;
  for (std::uint64_t t = 0; t < 4; ++t)
    threads.emplace_back([&, t] {
      // Each thread walks its stride backwards, so no query runs in sequence order.
      for (std::uint64_t k = 0; k < 64; ++k) {
        const std::uint64_t i = 255 - t - 4 * k;
        par[i] = respond(p, query_at(0.4), CounterRng(6, {i}));
      }
    });
  for (auto& th : threads) th.join();
  for (std::size_t i = 0; i < 256; ++i) {
    EXPECT_EQ(seq[i].correct, par[i].correct);
    EXPECT_EQ(seq[i].tokens, par[i].tokens);
    EXPECT_EQ(seq[i].latency_s, par[i].latency_s);
    EXPECT_EQ(seq[i].confidence, par[i].confidence);
    EXPECT_EQ(seq[i].stage_trace, par[i].stage_trace);
  }
}

TEST(OracleBestStrategy, PureAccuracy) {
  const auto fast = flat_profile(Strategy::Fast, 0.7, 145);
  const auto slow = flat_profile(Strategy::Slow, 0.8, 342);
  EXPECT_EQ(oracle_best_strategy(query_at(0.5), fast, slow, {0.0}), Strategy::Slow);
}

TEST(OracleBestStrategy, EqualAccuracyPrefersFast) {
  const auto fast = flat_profile(Strategy::Fast, 0.8, 145);
  const auto slow = flat_profile(Strategy::Slow, 0.8, 342);
  EXPECT_EQ(oracle_best_strategy(query_at(0.5), fast, slow, {0.1}), Strategy::Fast);
  // Exact tie in utility also goes to Fast.
  EXPECT_EQ(oracle_best_strategy(query_at(0.5), fast, flat_profile(Strategy::Slow, 0.8, 145), {0.1}),
            Strategy::Fast);
}

TEST(OracleBestStrategy, CostTradeoffArithmetic) {
  const auto fast = flat_profile(Strategy::Fast, 0.85, 145);
  const auto slow = flat_profile(Strategy::Slow, 0.90, 342);
  const UtilityConfig util{0.3};
  // Utilities computed by hand: 0.85 - 0.3*0.145 and 0.90 - 0.3*0.342.
  EXPECT_NEAR(expected_utility(fast, 0.5, util), 0.8065, 1e-12);
  EXPECT_NEAR(expected_utility(slow, 0.5, util), 0.7974, 1e-12);
  EXPECT_EQ(oracle_best_strategy(query_at(0.5), fast, slow, util), Strategy::Fast);
}

TEST(OracleBestStrategy, MonotoneInSlowAccuracy) {
  const auto fast = EngineProfile::default_fast();
  for (double z = 0.0; z <= 1.0; z += 0.05) {
    bool was_slow = false;
    for (double a = 0.0; a <= 1.0; a += 0.01) {
      const auto slow = flat_profile(Strategy::Slow, a, 342);
      const bool is_slow = oracle_best_strategy(query_at(z), fast, slow, {0.1}) == Strategy::Slow;
      ASSERT_FALSE(was_slow && !is_slow);
      was_slow = is_slow;
    }
  }
}

TEST(OracleBestStrategy, DefaultsSwitchToSlowAtHighComplexity) {
  const auto fast = EngineProfile::default_fast();
  const auto slow = EngineProfile::default_slow();
  EXPECT_EQ(oracle_best_strategy(query_at(0.1), fast, slow, {}), Strategy::Fast);
  EXPECT_EQ(oracle_best_strategy(query_at(0.9), fast, slow, {}), Strategy::Slow);
}
