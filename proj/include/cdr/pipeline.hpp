#pragma once

// End-to-end simulation: fit the three policies on a separately seeded
// training corpus, then benchmark every configured baseline on the
// evaluation corpus.

#include <array>
#include <vector>

#include "cdr/bench/corpus.hpp"
#include "cdr/bench/runner.hpp"
#include "cdr/io/config.hpp"
#include "cdr/routing/fit.hpp"

namespace cdr {

struct TrainedPolicies {
  bench::PolicySet policies;
  std::array<double, 3> training_accuracy{};  // linear, neural, tree at tau0
};

inline TrainedPolicies train_from_config(const io::AppConfig& cfg) {
  const auto train = bench::generate_corpus(cfg.training_corpus(), cfg.profiles.fast, cfg.profiles.slow, cfg.utility);
  const auto labeled = bench::labeled_features(train, bench::extract_all(train, cfg.bench.clustering));
  TrainedPolicies t;
  t.policies = bench::train_policies(labeled, cfg.policy, cfg.seed, cfg.bench.threshold.tau0);
  const double tau0 = cfg.bench.threshold.tau0;
  t.training_accuracy = {routing::training_accuracy(*t.policies.linear, labeled, tau0),
                         routing::training_accuracy(*t.policies.neural, labeled, tau0),
                         routing::training_accuracy(*t.policies.tree, labeled, tau0)};
  return t;
}

struct SimulationRun {
  std::vector<engines::SimulatedQuery> corpus;
  TrainedPolicies trained;
  bench::ComparisonTable table;
};

inline SimulationRun run_simulation(const io::AppConfig& cfg) {
  SimulationRun r;
  r.trained = train_from_config(cfg);
  r.corpus = bench::generate_corpus(cfg.corpus, cfg.profiles.fast, cfg.profiles.slow, cfg.utility);
  r.table = bench::compare_all(r.corpus, cfg.profiles, r.trained.policies, cfg.bench, cfg.baselines);
  return r;
}

}  // namespace cdr
