#pragma once

// Application configuration as JSON. Every section is optional and falls back
// to the defaults below; unknown keys anywhere are rejected with their path.

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cdr/bench/corpus.hpp"
#include "cdr/bench/runner.hpp"
#include "cdr/engines.hpp"
#include "cdr/io/serialize.hpp"

namespace cdr::io {

struct AppConfig {
  std::uint64_t seed = 42;
  std::string out = "cdr_out";
  bench::Profiles profiles;
  engines::UtilityConfig utility;
  bench::CorpusSpec corpus;        // corpus.seed is always derived from `seed`
  std::size_t train_queries = 2000;  // separate training corpus for policies
  std::string policy_kind = "neural";
  bench::PolicyTraining policy;
  bench::BenchConfig bench;        // bench.seed is always `seed`
  std::vector<bench::BaselineId> baselines{bench::kAllBaselines.begin(), bench::kAllBaselines.end()};

  // Pushes the master seed into every component that draws randomness.
  void resolve_seeds() {
    corpus.seed = seed;
    bench.seed = seed;
  }

  bench::CorpusSpec training_corpus() const {
    auto spec = corpus;
    spec.seed = combine_key(seed, 0x7a1);
    spec.n_queries = train_queries;
    return spec;
  }

  void validate() const {
    profiles.fast.validate();
    profiles.slow.validate();
    if (profiles.fast.kind != Strategy::Fast || profiles.slow.kind != Strategy::Slow)
      throw InvalidInput("engines: profile kinds are fixed to fast and slow");
    utility.validate();
    corpus.validate();
    if (train_queries < 2) throw InvalidInput("corpus.train_queries must be at least 2");
    if (policy_kind != "linear" && policy_kind != "neural" && policy_kind != "tree")
      throw InvalidInput("policy.kind must be one of linear, neural, tree");
    policy.validate();
    bench.validate();
    if (baselines.empty()) throw InvalidInput("bench.baselines must not be empty");
  }
};

namespace detail {

// Reads the fields of one config object, tracking the dotted path for messages.
class Section {
 public:
  Section(const Json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw InvalidInput(label() + ": expected an object");
  }

  std::string label() const { return path_.empty() ? "config" : path_; }
  std::string field(const char* key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const char* key) const { return j_.contains(key); }

  Section child(const char* key) const { return Section(j_.at(key), field(key)); }
  const Json& raw(const char* key) const { return j_.at(key); }

  void real(const char* key, double& out) const {
    if (has(key)) out = as_double(j_.at(key), field(key));
  }
  template <typename T>
  void count(const char* key, T& out) const {
    if (has(key)) out = static_cast<T>(as_u64(j_.at(key), field(key)));
  }
  void text(const char* key, std::string& out) const {
    if (has(key)) out = as_string(j_.at(key), field(key));
  }
  void flag(const char* key, bool& out) const {
    if (!has(key)) return;
    if (!j_.at(key).is_boolean()) throw InvalidInput(field(key) + ": expected true or false");
    out = j_.at(key).get<bool>();
  }

  void only(std::initializer_list<const char*> known) const {
    for (const auto& [key, value] : j_.items()) {
      bool ok = false;
      for (const char* k : known) ok = ok || key == k;
      if (!ok) throw InvalidInput(field(key.c_str()) + ": unknown key");
    }
  }

 private:
  const Json& j_;
  std::string path_;
};

inline void read_train(const Section& s, numeric::TrainConfig& cfg) {
  s.real("learning_rate", cfg.learning_rate);
  s.count("epochs", cfg.epochs);
  s.count("batch_size", cfg.batch_size);
  s.real("init_scale", cfg.init_scale);
  try {
    cfg.validate();
  } catch (const InvalidInput& e) {
    throw InvalidInput(s.label() + ": " + e.what());
  }
}

inline Json train_json(const numeric::TrainConfig& cfg) {
  Json j;
  j["learning_rate"] = cfg.learning_rate;
  j["epochs"] = cfg.epochs;
  j["batch_size"] = cfg.batch_size;
  j["init_scale"] = cfg.init_scale;
  return j;
}

inline void read_profile(const Section& s, engines::EngineProfile& p) {
  if (p.kind == Strategy::Slow)
    s.only({"accuracy", "tokens", "latency_s", "confidence_noise", "stage_fractions"});
  else
    s.only({"accuracy", "tokens", "latency_s", "confidence_noise"});
  if (s.has("accuracy")) {
    const auto& a = s.raw("accuracy");
    if (!a.is_array()) throw InvalidInput(s.field("accuracy") + ": expected an array of [z, accuracy] pairs");
    p.accuracy.points.clear();
    for (const auto& pt : a) {
      const auto v = as_reals(pt, s.field("accuracy"));
      if (v.size() != 2) throw InvalidInput(s.field("accuracy") + ": each point is [z, accuracy]");
      p.accuracy.points.emplace_back(v[0], v[1]);
    }
  }
  for (const char* key : {"tokens", "latency_s"}) {
    if (!s.has(key)) continue;
    const auto c = s.child(key);
    c.only({"mean", "std"});
    auto& cost = std::string(key) == "tokens" ? p.tokens : p.latency_s;
    c.real("mean", cost.mean);
    c.real("std", cost.stddev);
  }
  s.real("confidence_noise", p.confidence_noise);
  if (s.has("stage_fractions")) {
    const auto v = as_reals(s.raw("stage_fractions"), s.field("stage_fractions"));
    if (v.size() != 4) throw InvalidInput(s.field("stage_fractions") + ": expected 4 fractions");
    std::copy(v.begin(), v.end(), p.stage_fractions.begin());
  }
  try {
    p.validate();
  } catch (const InvalidInput& e) {
    throw InvalidInput(s.label() + ": " + e.what());
  }
}

inline Json profile_json(const engines::EngineProfile& p) {
  Json j;
  Json acc = Json::array();
  for (const auto& [z, a] : p.accuracy.points) acc.push_back(Json::array({z, a}));
  j["accuracy"] = std::move(acc);
  j["tokens"] = {{"mean", p.tokens.mean}, {"std", p.tokens.stddev}};
  j["latency_s"] = {{"mean", p.latency_s.mean}, {"std", p.latency_s.stddev}};
  j["confidence_noise"] = p.confidence_noise;
  if (p.kind == Strategy::Slow) j["stage_fractions"] = reals({p.stage_fractions.begin(), p.stage_fractions.end()});
  return j;
}

}  // namespace detail

inline AppConfig config_from_json(const Json& j) {
  AppConfig c;
  const detail::Section root(j, "");
  root.only({"seed", "out", "engines", "utility", "corpus", "clustering", "policy", "threshold", "bench"});
  root.count("seed", c.seed);
  root.text("out", c.out);

  if (root.has("engines")) {
    const auto s = root.child("engines");
    s.only({"fast", "slow"});
    if (s.has("fast")) detail::read_profile(s.child("fast"), c.profiles.fast);
    if (s.has("slow")) detail::read_profile(s.child("slow"), c.profiles.slow);
  }
  if (root.has("utility")) {
    const auto s = root.child("utility");
    s.only({"lambda_cost"});
    s.real("lambda_cost", c.utility.lambda_cost);
  }
  if (root.has("corpus")) {
    const auto s = root.child("corpus");
    s.only({"n_queries", "train_queries", "category_mix", "noise_scale", "embedding_dim", "n_options"});
    s.count("n_queries", c.corpus.n_queries);
    s.count("train_queries", c.train_queries);
    if (s.has("category_mix")) {
      const auto m = s.child("category_mix");
      m.only({bench::kCategoryNames[0], bench::kCategoryNames[1], bench::kCategoryNames[2], bench::kCategoryNames[3],
              bench::kCategoryNames[4]});
      for (std::size_t k = 0; k < bench::kCategoryCount; ++k) {
        c.corpus.category_mix[k] = 0.0;
        m.real(bench::kCategoryNames[k], c.corpus.category_mix[k]);
      }
    }
    s.real("noise_scale", c.corpus.noise_scale);
    s.count("embedding_dim", c.corpus.embedding_dim);
    s.count("n_options", c.corpus.n_options);
  }
  if (root.has("clustering")) {
    const auto s = root.child("clustering");
    s.only({"min_cluster_size", "merge_distance"});
    s.count("min_cluster_size", c.bench.clustering.min_cluster_size);
    s.real("merge_distance", c.bench.clustering.merge_distance);
    if (c.bench.clustering.min_cluster_size < 1) throw InvalidInput("clustering.min_cluster_size must be >= 1");
    if (!(c.bench.clustering.merge_distance > 0.0)) throw InvalidInput("clustering.merge_distance must be positive");
  }
  if (root.has("policy")) {
    const auto s = root.child("policy");
    s.only({"kind", "linear", "neural", "tree"});
    s.text("kind", c.policy_kind);
    if (s.has("linear")) {
      const auto l = s.child("linear");
      l.only({"learning_rate", "epochs", "batch_size", "init_scale"});
      detail::read_train(l, c.policy.linear);
    }
    if (s.has("neural")) {
      const auto n = s.child("neural");
      n.only({"hidden", "learning_rate", "epochs", "batch_size", "init_scale"});
      n.count("hidden", c.policy.neural_hidden);
      detail::read_train(n, c.policy.neural);
    }
    if (s.has("tree")) {
      const auto t = s.child("tree");
      t.only({"max_depth"});
      t.count("max_depth", c.policy.tree_depth);
    }
  }
  if (root.has("threshold")) {
    const auto s = root.child("threshold");
    s.only({"tau0", "alpha", "window", "tau_min", "tau_max", "exploration", "adapt"});
    auto& t = c.bench.threshold;
    s.real("tau0", t.tau0);
    s.real("alpha", t.alpha);
    s.count("window", t.window);
    s.real("tau_min", t.tau_min);
    s.real("tau_max", t.tau_max);
    s.real("exploration", c.bench.exploration);
    s.flag("adapt", c.bench.adapt_threshold);
  }
  if (root.has("bench")) {
    const auto s = root.child("bench");
    s.only({"repeats", "confidence_threshold", "ece_bins", "bootstrap_resamples", "baselines"});
    s.count("repeats", c.bench.repeats);
    s.real("confidence_threshold", c.bench.confidence_threshold);
    s.count("ece_bins", c.bench.ece_bins);
    s.count("bootstrap_resamples", c.bench.bootstrap_resamples);
    if (s.has("baselines")) {
      const auto& b = s.raw("baselines");
      if (!b.is_array()) throw InvalidInput("bench.baselines: expected an array of names");
      c.baselines.clear();
      for (const auto& name : b) c.baselines.push_back(bench::baseline_from_string(detail::as_string(name, "bench.baselines")));
    }
  }
  c.resolve_seeds();
  c.validate();
  return c;
}

inline AppConfig parse_config(const std::string& text) { return config_from_json(detail::parse_json(text, "config")); }

// Full resolved configuration. The output directory is left out so that a
// manifest reproduces identical artifacts wherever it is re-run.
inline Json manifest_json(const AppConfig& c) {
  Json j;
  j["seed"] = c.seed;
  j["engines"] = {{"fast", detail::profile_json(c.profiles.fast)}, {"slow", detail::profile_json(c.profiles.slow)}};
  j["utility"] = {{"lambda_cost", c.utility.lambda_cost}};
  Json mix;
  for (std::size_t k = 0; k < bench::kCategoryCount; ++k) mix[bench::kCategoryNames[k]] = c.corpus.category_mix[k];
  j["corpus"] = {{"n_queries", c.corpus.n_queries},      {"train_queries", c.train_queries},
                 {"category_mix", mix},                  {"noise_scale", c.corpus.noise_scale},
                 {"embedding_dim", c.corpus.embedding_dim}, {"n_options", c.corpus.n_options}};
  j["clustering"] = {{"min_cluster_size", c.bench.clustering.min_cluster_size},
                     {"merge_distance", c.bench.clustering.merge_distance}};
  Json neural = {{"hidden", c.policy.neural_hidden}};
  neural.update(detail::train_json(c.policy.neural));
  j["policy"] = {{"kind", c.policy_kind},
                 {"linear", detail::train_json(c.policy.linear)},
                 {"neural", neural},
                 {"tree", {{"max_depth", c.policy.tree_depth}}}};
  const auto& t = c.bench.threshold;
  j["threshold"] = {{"tau0", t.tau0},       {"alpha", t.alpha},
                    {"window", t.window},   {"tau_min", t.tau_min},
                    {"tau_max", t.tau_max}, {"exploration", c.bench.exploration},
                    {"adapt", c.bench.adapt_threshold}};
  Json names = Json::array();
  for (auto b : c.baselines) names.push_back(bench::to_string(b));
  j["bench"] = {{"repeats", c.bench.repeats},
                {"confidence_threshold", c.bench.confidence_threshold},
                {"ece_bins", c.bench.ece_bins},
                {"bootstrap_resamples", c.bench.bootstrap_resamples},
                {"baselines", names}};
  return j;
}

}  // namespace cdr::io
