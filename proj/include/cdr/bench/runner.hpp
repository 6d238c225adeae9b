#pragma once

// Runs routing baselines over a corpus with paired, counter-keyed randomness
// and aggregates accuracy, consistency, cost, calibration and routing confusion.

#include <algorithm>
#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cdr/bench/corpus.hpp"
#include "cdr/bench/metrics.hpp"
#include "cdr/engines.hpp"
#include "cdr/errors.hpp"
#include "cdr/features.hpp"
#include "cdr/numeric/linalg.hpp"
#include "cdr/random.hpp"
#include "cdr/routing/fit.hpp"
#include "cdr/routing/policy.hpp"
#include "cdr/routing/threshold.hpp"

namespace cdr::bench {

enum class BaselineId {
  uniform_fast,
  uniform_slow,
  random,
  confidence_based,
  length_based,
  cdr_linear,
  cdr_neural,
  cdr_tree,
};

inline constexpr std::array<BaselineId, 8> kAllBaselines = {
    BaselineId::uniform_fast,     BaselineId::uniform_slow, BaselineId::random,     BaselineId::confidence_based,
    BaselineId::length_based,     BaselineId::cdr_linear,   BaselineId::cdr_neural, BaselineId::cdr_tree};

inline const char* to_string(BaselineId b) {
  switch (b) {
    case BaselineId::uniform_fast: return "uniform_fast";
    case BaselineId::uniform_slow: return "uniform_slow";
    case BaselineId::random: return "random";
    case BaselineId::confidence_based: return "confidence_based";
    case BaselineId::length_based: return "length_based";
    case BaselineId::cdr_linear: return "cdr_linear";
    case BaselineId::cdr_neural: return "cdr_neural";
    case BaselineId::cdr_tree: return "cdr_tree";
  }
  return "?";
}

inline BaselineId baseline_from_string(const std::string& s) {
  for (auto b : kAllBaselines)
    if (s == to_string(b)) return b;
  throw InvalidInput("unknown baseline '" + s + "'");
}

struct Profiles {
  engines::EngineProfile fast = engines::EngineProfile::default_fast();
  engines::EngineProfile slow = engines::EngineProfile::default_slow();
};

struct PolicySet {
  std::optional<routing::Policy> linear;
  std::optional<routing::Policy> neural;
  std::optional<routing::Policy> tree;
};

struct BenchConfig {
  std::size_t repeats = 10;
  std::uint64_t seed = 42;
  routing::ThresholdSettings threshold;
  bool adapt_threshold = true;
  double exploration = 0.1;  // fraction of cdr queries that also run the other engine
  double confidence_threshold = 0.7;
  std::size_t ece_bins = 10;
  std::size_t bootstrap_resamples = 10000;
  features::ClusteringConfig clustering;

  void validate() const {
    if (repeats < 1) throw InvalidInput("bench.repeats must be >= 1");
    threshold.validate();
    if (!(exploration >= 0.0 && exploration <= 1.0)) throw InvalidInput("bench.exploration must lie in [0,1]");
    if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0))
      throw InvalidInput("bench.confidence_threshold must lie in [0,1]");
    if (ece_bins < 1) throw InvalidInput("bench.ece_bins must be >= 1");
    if (bootstrap_resamples < 1) throw InvalidInput("bench.bootstrap_resamples must be >= 1");
  }
};

// Everything one baseline produced, kept per query for paired statistics.
struct BaselineRun {
  BaselineId id = BaselineId::uniform_fast;
  RunMetrics metrics;
  ConfusionReport confusion;
  std::vector<double> query_accuracy;  // mean over repeats
  std::vector<double> query_tokens;    // mean over repeats
  double exploration_tokens = 0.0;     // mean per query-run, spent on counterfactual runs
  double final_tau = 0.0;              // tau at the end of the last repeat (cdr only)
};

inline std::vector<features::FeatureVector> extract_all(const std::vector<engines::SimulatedQuery>& corpus,
                                                        const features::ClusteringConfig& clustering) {
  std::vector<features::FeatureVector> out;
  out.reserve(corpus.size());
  for (const auto& q : corpus) out.push_back(features::extract_features(q.record, nullptr, clustering));
  return out;
}

inline std::vector<routing::LabeledFeatures> labeled_features(const std::vector<engines::SimulatedQuery>& corpus,
                                                              const std::vector<features::FeatureVector>& feats) {
  std::vector<routing::LabeledFeatures> out;
  out.reserve(corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    if (!corpus[i].oracle_label) throw InvalidInput("query " + corpus[i].record.id + " has no oracle label");
    out.push_back({feats[i], *corpus[i].oracle_label});
  }
  return out;
}

struct PolicyTraining {
  numeric::TrainConfig linear{0.5, 200, 32, 0, 0.1};
  std::size_t neural_hidden = 8;
  numeric::TrainConfig neural{0.5, 200, 32, 0, 0.5};
  std::size_t tree_depth = 4;

  void validate() const {
    linear.validate();
    neural.validate();
    if (neural_hidden < 1) throw InvalidInput("policy.neural_hidden must be >= 1");
    if (tree_depth < 1) throw InvalidInput("policy.tree_depth must be >= 1");
  }
};

// Fits all three policy kinds on one labelled corpus; seed is applied to the
// gradient-trained kinds.
inline PolicySet train_policies(const std::vector<routing::LabeledFeatures>& data, const PolicyTraining& cfg,
                                std::uint64_t seed, double tau0 = 0.5) {
  cfg.validate();
  auto lin = cfg.linear;
  lin.seed = combine_key(seed, 1);
  auto neu = cfg.neural;
  neu.seed = combine_key(seed, 2);
  PolicySet set;
  set.linear = routing::fit_linear(data, lin, tau0);
  set.neural = routing::fit_neural(data, cfg.neural_hidden, neu);
  set.tree = routing::fit_tree(data, cfg.tree_depth);
  return set;
}

namespace detail {

inline double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

// Keyed by (seed, repeat, query id, engine) so every baseline sees the same draw.
inline CounterRng engine_stream(std::uint64_t seed, std::size_t repeat, const std::string& id, Strategy s) {
  return CounterRng(seed, {0xe9, repeat, hash_string(id), static_cast<std::uint64_t>(s)});
}

inline const routing::Policy& require_policy(const std::optional<routing::Policy>& p, BaselineId id) {
  if (!p) throw InvalidInput(std::string("baseline ") + to_string(id) + " needs a trained policy");
  return *p;
}

}  // namespace detail

inline BaselineRun run_baseline(const std::vector<engines::SimulatedQuery>& corpus,
                                const std::vector<features::FeatureVector>& feats, BaselineId id,
                                const Profiles& profiles, const PolicySet& policies, const BenchConfig& cfg) {
  cfg.validate();
  if (corpus.empty()) throw InvalidInput("run_baseline: empty corpus");
  if (feats.size() != corpus.size()) throw InvalidInput("run_baseline: feature/corpus length mismatch");

  const routing::Policy* policy = nullptr;
  if (id == BaselineId::cdr_linear) policy = &detail::require_policy(policies.linear, id);
  if (id == BaselineId::cdr_neural) policy = &detail::require_policy(policies.neural, id);
  if (id == BaselineId::cdr_tree) policy = &detail::require_policy(policies.tree, id);
  if (policy) routing::validate(*policy);

  double length_median = 0.0;
  if (id == BaselineId::length_based) {
    std::vector<double> lengths;
    for (const auto& q : corpus) lengths.push_back(static_cast<double>(q.record.concept_embeddings.size()));
    length_median = detail::median(std::move(lengths));
  }
  std::vector<double> scores;
  if (policy)
    for (const auto& f : feats) scores.push_back(routing::score(*policy, f));

  const std::size_t n = corpus.size();
  const std::size_t runs = n * cfg.repeats;
  std::vector<std::vector<std::uint64_t>> answers(n, std::vector<std::uint64_t>(cfg.repeats));
  std::vector<double> confidences;
  const auto correct_flags = std::make_unique<bool[]>(runs);
  std::vector<Strategy> decisions, oracle;
  std::vector<std::string> categories;
  confidences.reserve(runs);
  decisions.reserve(runs);
  oracle.reserve(runs);
  categories.reserve(runs);

  BaselineRun out;
  out.id = id;
  out.query_accuracy.assign(n, 0.0);
  out.query_tokens.assign(n, 0.0);
  numeric::CompensatedSum tokens, latency, explore_tokens;
  std::size_t n_correct = 0, n_fast = 0;

  for (std::size_t rep = 0; rep < cfg.repeats; ++rep) {
    auto state = routing::ThresholdState::from(cfg.threshold);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& q = corpus[i];
      Strategy s = Strategy::Fast;
      switch (id) {
        case BaselineId::uniform_fast: s = Strategy::Fast; break;
        case BaselineId::uniform_slow: s = Strategy::Slow; break;
        case BaselineId::random: {
          CounterRng coin(cfg.seed, {0x7a4d, rep, hash_string(q.record.id)});
          s = coin.bernoulli(0.5) ? Strategy::Fast : Strategy::Slow;
          break;
        }
        case BaselineId::confidence_based:
          s = (1.0 - feats[i].u_l) < cfg.confidence_threshold ? Strategy::Slow : Strategy::Fast;
          break;
        case BaselineId::length_based:
          s = static_cast<double>(q.record.concept_embeddings.size()) > length_median ? Strategy::Slow : Strategy::Fast;
          break;
        default: s = routing::route(scores[i], state, feats[i]).strategy; break;
      }

      const auto& profile = s == Strategy::Fast ? profiles.fast : profiles.slow;
      const auto resp = engines::respond(profile, q, detail::engine_stream(cfg.seed, rep, q.record.id, s));

      if (policy && cfg.adapt_threshold) {
        routing::Outcome o{s, resp.correct, std::nullopt, i};
        CounterRng explore(cfg.seed, {0xe8, rep, hash_string(q.record.id)});
        if (explore.bernoulli(cfg.exploration)) {
          const Strategy other = s == Strategy::Fast ? Strategy::Slow : Strategy::Fast;
          const auto& other_profile = other == Strategy::Fast ? profiles.fast : profiles.slow;
          const auto cf = engines::respond(other_profile, q, detail::engine_stream(cfg.seed, rep, q.record.id, other));
          o.counterfactual_correct = cf.correct;
          explore_tokens.add(static_cast<double>(cf.tokens));
        }
        state = routing::record_outcome(std::move(state), o);
        if (routing::has_evidence(state)) state = routing::update_threshold(std::move(state));
      }

      answers[i][rep] = resp.answer;
      confidences.push_back(resp.confidence);
      correct_flags[confidences.size() - 1] = resp.correct;
      decisions.push_back(s);
      oracle.push_back(q.oracle_label.value_or(Strategy::Fast));
      categories.push_back(q.category);
      tokens.add(static_cast<double>(resp.tokens));
      latency.add(resp.latency_s);
      n_correct += resp.correct;
      n_fast += s == Strategy::Fast;
      out.query_accuracy[i] += resp.correct ? 1.0 : 0.0;
      out.query_tokens[i] += static_cast<double>(resp.tokens);
    }
    out.final_tau = state.tau;
  }

  const double total = static_cast<double>(runs);
  for (std::size_t i = 0; i < n; ++i) {
    out.query_accuracy[i] /= static_cast<double>(cfg.repeats);
    out.query_tokens[i] /= static_cast<double>(cfg.repeats);
  }
  out.metrics.accuracy = static_cast<double>(n_correct) / total;
  out.metrics.consistency = cfg.repeats >= 2 ? consistency(answers) : 1.0;
  out.metrics.mean_tokens = tokens.value() / total;
  out.metrics.mean_latency_s = latency.value() / total;
  out.metrics.ece = calibration_ece(confidences, std::span<const bool>(correct_flags.get(), runs), cfg.ece_bins);
  out.metrics.fast_fraction = static_cast<double>(n_fast) / total;
  out.confusion = routing_confusion(decisions, oracle, categories);
  out.exploration_tokens = explore_tokens.value() / total;
  return out;
}

struct ComparisonRow {
  BaselineRun run;
  Interval accuracy_ci;
  Interval tokens_ci;
  double accuracy_delta_vs_fast = 0.0;  // paired, in accuracy units
  Interval accuracy_delta_ci;
  double token_savings_vs_slow = 0.0;  // 1 - tokens / uniform_slow tokens
  Interval token_savings_ci;
};

struct ComparisonTable {
  std::vector<ComparisonRow> rows;

  const ComparisonRow& row(BaselineId id) const {
    for (const auto& r : rows)
      if (r.run.id == id) return r;
    throw InvalidInput(std::string("no row for baseline ") + to_string(id));
  }
};

// Every baseline on the same corpus with aligned engine streams; bootstrap
// intervals resample queries with one shared set of resamples.
inline ComparisonTable compare_all(const std::vector<engines::SimulatedQuery>& corpus, const Profiles& profiles,
                                   const PolicySet& policies, const BenchConfig& cfg,
                                   const std::vector<BaselineId>& baselines = {kAllBaselines.begin(),
                                                                               kAllBaselines.end()}) {
  cfg.validate();
  const auto feats = extract_all(corpus, cfg.clustering);
  ComparisonTable table;
  for (auto id : baselines) {
    ComparisonRow row;
    row.run = run_baseline(corpus, feats, id, profiles, policies, cfg);
    table.rows.push_back(std::move(row));
  }

  const PairedBootstrap boot(corpus.size(), cfg.bootstrap_resamples, cfg.seed);
  auto reference = [&](BaselineId id) {
    for (const auto& r : table.rows)
      if (r.run.id == id) return r.run;
    return run_baseline(corpus, feats, id, profiles, policies, cfg);
  };
  const auto fast = reference(BaselineId::uniform_fast);
  const auto slow = reference(BaselineId::uniform_slow);
  const auto fast_acc = boot.resampled_means({fast.query_accuracy})[0];
  const auto slow_tok = boot.resampled_means({slow.query_tokens})[0];
  for (auto& row : table.rows) {
    auto m = boot.resampled_means({row.run.query_accuracy, row.run.query_tokens});
    row.accuracy_ci = PairedBootstrap::percentile_interval(m[0]);
    row.tokens_ci = PairedBootstrap::percentile_interval(m[1]);
    std::vector<double> delta(m[0].size()), savings(m[1].size());
    for (std::size_t b = 0; b < delta.size(); ++b) {
      delta[b] = m[0][b] - fast_acc[b];
      savings[b] = 1.0 - m[1][b] / slow_tok[b];
    }
    row.accuracy_delta_vs_fast = row.run.metrics.accuracy - fast.metrics.accuracy;
    row.accuracy_delta_ci = PairedBootstrap::percentile_interval(std::move(delta));
    row.token_savings_vs_slow = 1.0 - row.run.metrics.mean_tokens / slow.metrics.mean_tokens;
    row.token_savings_ci = PairedBootstrap::percentile_interval(std::move(savings));
  }
  return table;
}

}  // namespace cdr::bench
