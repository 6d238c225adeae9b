#pragma once

// Text formats: JSON policy documents, JSON-lines queries/corpus/decisions,
// and comma-separated metric tables. Doubles are written in shortest
// round-trip form, so parse(serialize(x)) == x bit for bit.

#include <charconv>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <system_error>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cdr/bench/runner.hpp"
#include "cdr/engines.hpp"
#include "cdr/errors.hpp"
#include "cdr/features.hpp"
#include "cdr/numeric/mlp.hpp"
#include "cdr/routing/policy.hpp"
#include "cdr/routing/threshold.hpp"

namespace cdr::io {

using Json = nlohmann::ordered_json;

inline constexpr int kPolicyFormatVersion = 1;

// ---------------------------------------------------------------- files

inline std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string() + " for reading");
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw IoError("failed reading " + path.string());
  return ss.str();
}

inline void write_text_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << content;
  out.flush();
  if (!out) throw IoError("failed writing " + path.string());
}

inline void ensure_directory(const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

inline std::vector<std::string> split_lines(const std::string& text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    start = end + 1;
  }
  return lines;
}

// ---------------------------------------------------------------- numbers

inline std::string format_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

inline double parse_double(const std::string& s, const std::string& what) {
  double v = 0.0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) throw InvalidInput(what + ": not a number: '" + s + "'");
  return v;
}

// ---------------------------------------------------------------- json helpers

namespace detail {

inline const Json& member(const Json& j, const char* key, const std::string& where) {
  if (!j.is_object()) throw InvalidInput(where + ": expected an object");
  const auto it = j.find(key);
  if (it == j.end()) throw InvalidInput(where + ": missing field '" + key + "'");
  return *it;
}

inline double as_double(const Json& j, const std::string& where) {
  if (!j.is_number()) throw InvalidInput(where + ": expected a number");
  return j.get<double>();
}

inline std::uint64_t as_u64(const Json& j, const std::string& where) {
  if (!j.is_number_unsigned() && !(j.is_number_integer() && j.get<std::int64_t>() >= 0))
    throw InvalidInput(where + ": expected a non-negative integer");
  return j.get<std::uint64_t>();
}

inline std::string as_string(const Json& j, const std::string& where) {
  if (!j.is_string()) throw InvalidInput(where + ": expected a string");
  return j.get<std::string>();
}

inline std::vector<double> as_reals(const Json& j, const std::string& where) {
  if (!j.is_array()) throw InvalidInput(where + ": expected an array of numbers");
  std::vector<double> v;
  v.reserve(j.size());
  for (std::size_t i = 0; i < j.size(); ++i) v.push_back(as_double(j[i], where + "[" + std::to_string(i) + "]"));
  return v;
}

inline Json reals(const std::vector<double>& v) {
  Json a = Json::array();
  for (double x : v) a.push_back(x);
  return a;
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> known, const std::string& where) {
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw InvalidInput(where + ": unknown field '" + key + "'");
  }
}

inline Json parse_json(const std::string& text, const std::string& where) {
  try {
    return Json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw InvalidInput(where + ": malformed JSON (" + e.what() + ")");
  }
}

}  // namespace detail

// ---------------------------------------------------------------- mlp

inline Json to_json(const numeric::MlpParams& p) {
  Json j;
  j["layer_sizes"] = p.layer_sizes;
  j["hidden_activation"] = numeric::to_string(p.hidden);
  j["output_activation"] = numeric::to_string(p.output);
  Json w = Json::array(), b = Json::array();
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    Json rows = Json::array();
    for (std::size_t r = 0; r < p.weights[l].rows; ++r) {
      const auto row = p.weights[l].row(r);
      rows.push_back(detail::reals({row.begin(), row.end()}));
    }
    w.push_back(std::move(rows));
    b.push_back(detail::reals(p.biases[l]));
  }
  j["weights"] = std::move(w);
  j["biases"] = std::move(b);
  return j;
}

inline numeric::MlpParams mlp_from_json(const Json& j, const std::string& where = "mlp") {
  detail::reject_unknown(j, {"layer_sizes", "hidden_activation", "output_activation", "weights", "biases"}, where);
  const auto& sizes_j = detail::member(j, "layer_sizes", where);
  if (!sizes_j.is_array()) throw InvalidInput(where + ".layer_sizes: expected an array");
  std::vector<std::size_t> sizes;
  for (const auto& s : sizes_j) sizes.push_back(detail::as_u64(s, where + ".layer_sizes"));
  auto p = numeric::MlpParams::zeros(
      sizes, numeric::activation_from_string(detail::as_string(detail::member(j, "hidden_activation", where), where)),
      numeric::activation_from_string(detail::as_string(detail::member(j, "output_activation", where), where)));
  const auto& w = detail::member(j, "weights", where);
  const auto& b = detail::member(j, "biases", where);
  if (!w.is_array() || w.size() != p.weights.size() || !b.is_array() || b.size() != p.biases.size())
    throw InvalidInput(where + ": weight/bias layer count does not match layer_sizes");
  for (std::size_t l = 0; l < p.weights.size(); ++l) {
    const std::string wl = where + ".weights[" + std::to_string(l) + "]";
    if (!w[l].is_array() || w[l].size() != p.weights[l].rows) throw InvalidInput(wl + ": wrong row count");
    for (std::size_t r = 0; r < p.weights[l].rows; ++r) {
      const auto row = detail::as_reals(w[l][r], wl);
      if (row.size() != p.weights[l].cols) throw InvalidInput(wl + ": wrong column count");
      for (std::size_t c = 0; c < row.size(); ++c) p.weights[l](r, c) = row[c];
    }
    const auto bias = detail::as_reals(b[l], where + ".biases");
    if (bias.size() != p.biases[l].size()) throw InvalidInput(where + ".biases: wrong length");
    p.biases[l] = bias;
  }
  p.validate();
  return p;
}

// ---------------------------------------------------------------- policies

inline Json to_json(const routing::Policy& policy) {
  Json j;
  j["version"] = kPolicyFormatVersion;
  j["kind"] = routing::policy_kind(policy);
  Json params;
  if (const auto* lin = std::get_if<routing::LinearPolicy>(&policy)) {
    params["weights"] = detail::reals({lin->weights.begin(), lin->weights.end()});
  } else if (const auto* neu = std::get_if<routing::NeuralPolicy>(&policy)) {
    params["net"] = to_json(neu->net);
  } else {
    const auto& tree = std::get<routing::TreePolicy>(policy);
    params["max_depth"] = tree.max_depth;
    Json nodes = Json::array();
    for (const auto& n : tree.nodes) {
      Json node;
      if (n.is_leaf()) {
        node["score"] = n.score;
      } else {
        node["feature"] = n.feature;
        node["threshold"] = n.threshold;
        node["left"] = n.left;
        node["right"] = n.right;
      }
      nodes.push_back(std::move(node));
    }
    params["nodes"] = std::move(nodes);
  }
  j["parameters"] = std::move(params);
  return j;
}

inline std::string serialize_policy(const routing::Policy& policy) { return to_json(policy).dump(2) + "\n"; }

inline routing::Policy policy_from_json(const Json& j) {
  const std::string where = "policy";
  detail::reject_unknown(j, {"version", "kind", "parameters"}, where);
  const auto version = detail::as_u64(detail::member(j, "version", where), where + ".version");
  if (version != kPolicyFormatVersion)
    throw InvalidInput(where + ": unsupported format version " + std::to_string(version));
  const auto kind = detail::as_string(detail::member(j, "kind", where), where + ".kind");
  const auto& params = detail::member(j, "parameters", where);
  const std::string pw = where + ".parameters";
  routing::Policy out;
  if (kind == "linear") {
    detail::reject_unknown(params, {"weights"}, pw);
    const auto w = detail::as_reals(detail::member(params, "weights", pw), pw + ".weights");
    if (w.size() != 4) throw InvalidInput(pw + ".weights: expected 4 weights");
    routing::LinearPolicy p;
    std::copy(w.begin(), w.end(), p.weights.begin());
    out = p;
  } else if (kind == "neural") {
    detail::reject_unknown(params, {"net"}, pw);
    out = routing::NeuralPolicy{mlp_from_json(detail::member(params, "net", pw), pw + ".net")};
  } else if (kind == "tree") {
    detail::reject_unknown(params, {"max_depth", "nodes"}, pw);
    routing::TreePolicy t;
    t.max_depth = detail::as_u64(detail::member(params, "max_depth", pw), pw + ".max_depth");
    const auto& nodes = detail::member(params, "nodes", pw);
    if (!nodes.is_array()) throw InvalidInput(pw + ".nodes: expected an array");
    for (std::size_t i = 0; i < nodes.size(); ++i) {
      const std::string nw = pw + ".nodes[" + std::to_string(i) + "]";
      const auto& n = nodes[i];
      routing::TreeNode node;
      if (n.is_object() && n.contains("score")) {
        detail::reject_unknown(n, {"score"}, nw);
        node.score = detail::as_double(n["score"], nw + ".score");
      } else {
        detail::reject_unknown(n, {"feature", "threshold", "left", "right"}, nw);
        node.feature = static_cast<int>(detail::as_u64(detail::member(n, "feature", nw), nw + ".feature"));
        node.threshold = detail::as_double(detail::member(n, "threshold", nw), nw + ".threshold");
        node.left = detail::as_u64(detail::member(n, "left", nw), nw + ".left");
        node.right = detail::as_u64(detail::member(n, "right", nw), nw + ".right");
      }
      t.nodes.push_back(node);
    }
    out = std::move(t);
  } else {
    throw InvalidInput(where + ".kind: unknown policy kind '" + kind + "'");
  }
  routing::validate(out);
  return out;
}

inline routing::Policy parse_policy(const std::string& text) {
  return policy_from_json(detail::parse_json(text, "policy"));
}

// ---------------------------------------------------------------- queries

inline Json to_json(const features::QueryRecord& q) {
  Json j;
  j["id"] = q.id;
  Json concepts = Json::array();
  for (const auto& e : q.concept_embeddings) concepts.push_back(detail::reals(e));
  j["concept_embeddings"] = std::move(concepts);
  j["stakeholder_count"] = q.stakeholder_count;
  j["candidate_probs"] = detail::reals(q.candidate_probs);
  Json corr;
  if (const auto* joint = std::get_if<numeric::DiscreteJoint>(&q.correlation_input)) {
    Json rows = Json::array();
    for (std::size_t x = 0; x < joint->x_states(); ++x) {
      Json row = Json::array();
      for (std::size_t y = 0; y < joint->y_states(); ++y) row.push_back((*joint)(x, y));
      rows.push_back(std::move(row));
    }
    corr["joint"] = std::move(rows);
  } else {
    corr["embedding"] = detail::reals(std::get<numeric::RealVector>(q.correlation_input));
  }
  j["correlation"] = std::move(corr);
  if (q.text) j["text"] = *q.text;
  return j;
}

inline const std::initializer_list<const char*> kQueryFields = {"id", "concept_embeddings", "stakeholder_count",
                                                                  "candidate_probs", "correlation", "text"};

// Reads the query fields of j; extra fields are left to the caller.
inline features::QueryRecord query_from_json(const Json& j, const std::string& where = "query") {
  features::QueryRecord q;
  q.id = detail::as_string(detail::member(j, "id", where), where + ".id");
  if (q.id.empty()) throw InvalidInput(where + ".id: must not be empty");
  const auto& concepts = detail::member(j, "concept_embeddings", where);
  if (!concepts.is_array()) throw InvalidInput(where + ".concept_embeddings: expected an array");
  for (const auto& c : concepts) q.concept_embeddings.push_back(detail::as_reals(c, where + ".concept_embeddings"));
  q.stakeholder_count = detail::as_u64(detail::member(j, "stakeholder_count", where), where + ".stakeholder_count");
  q.candidate_probs = detail::as_reals(detail::member(j, "candidate_probs", where), where + ".candidate_probs");
  const auto& corr = detail::member(j, "correlation", where);
  const std::string cw = where + ".correlation";
  if (!corr.is_object() || corr.size() != 1) throw InvalidInput(cw + ": expected exactly one of 'joint' or 'embedding'");
  if (corr.contains("joint")) {
    const auto& rows = corr["joint"];
    if (!rows.is_array() || rows.empty()) throw InvalidInput(cw + ".joint: expected a non-empty 2-D array");
    std::vector<double> p;
    std::size_t cols = 0;
    for (std::size_t r = 0; r < rows.size(); ++r) {
      const auto row = detail::as_reals(rows[r], cw + ".joint");
      if (r == 0) cols = row.size();
      if (row.size() != cols || cols == 0) throw InvalidInput(cw + ".joint: ragged rows");
      p.insert(p.end(), row.begin(), row.end());
    }
    q.correlation_input = numeric::DiscreteJoint(rows.size(), cols, std::move(p));
  } else if (corr.contains("embedding")) {
    q.correlation_input = detail::as_reals(corr["embedding"], cw + ".embedding");
  } else {
    throw InvalidInput(cw + ": expected 'joint' or 'embedding'");
  }
  if (j.contains("text")) q.text = detail::as_string(j["text"], where + ".text");
  return q;
}

inline features::QueryRecord parse_query_line(const std::string& line) {
  const auto j = detail::parse_json(line, "query");
  detail::reject_unknown(j, kQueryFields, "query");
  return query_from_json(j);
}

// ---------------------------------------------------------------- corpus

inline Json to_json(const engines::SimulatedQuery& q) {
  Json j = to_json(q.record);
  j["category"] = q.category;
  j["latent_complexity"] = q.latent_complexity;
  j["n_options"] = q.n_options;
  if (q.oracle_label) j["oracle_label"] = to_string(*q.oracle_label);
  return j;
}

inline std::string serialize_corpus(const std::vector<engines::SimulatedQuery>& corpus) {
  std::string out;
  for (const auto& q : corpus) out += to_json(q).dump() + "\n";
  return out;
}

inline engines::SimulatedQuery simulated_query_from_json(const Json& j, const std::string& where) {
  detail::reject_unknown(j, {"id", "concept_embeddings", "stakeholder_count", "candidate_probs", "correlation", "text",
                             "category", "latent_complexity", "n_options", "oracle_label"},
                         where);
  engines::SimulatedQuery q;
  q.record = query_from_json(j, where);
  q.category = detail::as_string(detail::member(j, "category", where), where + ".category");
  q.latent_complexity = detail::as_double(detail::member(j, "latent_complexity", where), where + ".latent_complexity");
  if (!(q.latent_complexity >= 0.0 && q.latent_complexity <= 1.0))
    throw InvalidInput(where + ".latent_complexity: must lie in [0,1]");
  q.n_options = detail::as_u64(detail::member(j, "n_options", where), where + ".n_options");
  if (j.contains("oracle_label"))
    q.oracle_label = strategy_from_string(detail::as_string(j["oracle_label"], where + ".oracle_label"));
  return q;
}

inline std::vector<engines::SimulatedQuery> parse_corpus(const std::string& text) {
  std::vector<engines::SimulatedQuery> corpus;
  const auto lines = split_lines(text);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::string where = "line " + std::to_string(i + 1);
    corpus.push_back(simulated_query_from_json(detail::parse_json(lines[i], where), where));
  }
  return corpus;
}

// ---------------------------------------------------------------- decisions

struct DecisionRecord {
  std::string id;
  routing::RoutingDecision decision;

  bool operator==(const DecisionRecord& o) const {
    return id == o.id && decision.strategy == o.decision.strategy && decision.score == o.decision.score &&
           decision.tau_at_decision == o.decision.tau_at_decision && decision.features == o.decision.features;
  }
};

inline Json to_json(const DecisionRecord& d) {
  Json j;
  j["id"] = d.id;
  j["strategy"] = to_string(d.decision.strategy);
  j["score"] = d.decision.score;
  j["tau"] = d.decision.tau_at_decision;
  Json f;
  const auto a = d.decision.features.as_array();
  for (std::size_t k = 0; k < 4; ++k) f[features::kFeatureNames[k]] = a[k];
  j["features"] = std::move(f);
  return j;
}

inline std::string error_sentinel(std::size_t line_no, const std::string& message) {
  Json j;
  j["line"] = line_no;
  j["error"] = message;
  return j.dump();
}

inline DecisionRecord parse_decision_line(const std::string& line) {
  const std::string where = "decision";
  const auto j = detail::parse_json(line, where);
  detail::reject_unknown(j, {"id", "strategy", "score", "tau", "features"}, where);
  DecisionRecord d;
  d.id = detail::as_string(detail::member(j, "id", where), where + ".id");
  d.decision.strategy = strategy_from_string(detail::as_string(detail::member(j, "strategy", where), where));
  d.decision.score = detail::as_double(detail::member(j, "score", where), where + ".score");
  d.decision.tau_at_decision = detail::as_double(detail::member(j, "tau", where), where + ".tau");
  const auto& f = detail::member(j, "features", where);
  detail::reject_unknown(f, {"c_s", "d_c", "s_m", "u_l"}, where + ".features");
  d.decision.features.c_s = detail::as_double(detail::member(f, "c_s", where), "c_s");
  d.decision.features.d_c = detail::as_double(detail::member(f, "d_c", where), "d_c");
  d.decision.features.s_m = detail::as_double(detail::member(f, "s_m", where), "s_m");
  d.decision.features.u_l = detail::as_double(detail::member(f, "u_l", where), "u_l");
  return d;
}

// ---------------------------------------------------------------- csv tables

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;

  std::optional<std::size_t> column(const std::string& name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return i;
    return std::nullopt;
  }

  bool operator==(const CsvTable&) const = default;
};

inline std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  while (true) {
    const std::size_t comma = line.find(',', start);
    cells.push_back(line.substr(start, comma == std::string::npos ? std::string::npos : comma - start));
    if (comma == std::string::npos) break;
    start = comma + 1;
  }
  return cells;
}

inline std::string serialize_csv(const CsvTable& t) {
  auto emit = [](const std::vector<std::string>& cells) {
    std::string line;
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (cells[i].find_first_of(",\n\"") != std::string::npos)
        throw InvalidInput("csv: cell contains a reserved character: '" + cells[i] + "'");
      if (i) line += ',';
      line += cells[i];
    }
    return line + "\n";
  };
  std::string out = emit(t.header);
  for (const auto& r : t.rows) {
    if (r.size() != t.header.size()) throw InvalidInput("csv: row width differs from header");
    out += emit(r);
  }
  return out;
}

inline CsvTable parse_csv(const std::string& text) {
  CsvTable t;
  const auto lines = split_lines(text);
  std::size_t i = 0;
  while (i < lines.size() && lines[i].empty()) ++i;
  if (i == lines.size()) throw InvalidInput("csv: missing header line");
  t.header = split_csv_line(lines[i]);
  for (++i; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    auto cells = split_csv_line(lines[i]);
    if (cells.size() != t.header.size())
      throw InvalidInput("csv line " + std::to_string(i + 1) + ": expected " + std::to_string(t.header.size()) +
                         " cells, found " + std::to_string(cells.size()));
    t.rows.push_back(std::move(cells));
  }
  return t;
}

// ---------------------------------------------------------------- metrics

inline const std::vector<std::string>& metrics_columns() {
  static const std::vector<std::string> cols = {
      "baseline",           "accuracy",          "accuracy_ci_low",    "accuracy_ci_high",       "consistency",
      "mean_tokens",        "tokens_ci_low",     "tokens_ci_high",     "exploration_tokens",     "mean_latency_s",
      "ece",                "fast_fraction",     "routing_accuracy",   "false_positive_rate",    "false_negative_rate",
      "accuracy_delta",     "accuracy_delta_ci_low", "accuracy_delta_ci_high", "final_tau"};
  return cols;
}

// One row of metrics.csv. accuracy_delta is paired against uniform_fast.
struct MetricsRow {
  std::string baseline;
  bench::RunMetrics metrics;
  bench::Interval accuracy_ci;
  bench::Interval tokens_ci;
  double exploration_tokens = 0.0;
  double routing_accuracy = 0.0;
  double false_positive_rate = 0.0;
  double false_negative_rate = 0.0;
  double accuracy_delta = 0.0;
  bench::Interval accuracy_delta_ci;
  double final_tau = 0.0;

  bool operator==(const MetricsRow& o) const {
    const auto& a = metrics;
    const auto& b = o.metrics;
    return baseline == o.baseline && a.accuracy == b.accuracy && a.consistency == b.consistency &&
           a.mean_tokens == b.mean_tokens && a.mean_latency_s == b.mean_latency_s && a.ece == b.ece &&
           a.fast_fraction == b.fast_fraction && accuracy_ci.low == o.accuracy_ci.low &&
           accuracy_ci.high == o.accuracy_ci.high && tokens_ci.low == o.tokens_ci.low &&
           tokens_ci.high == o.tokens_ci.high && exploration_tokens == o.exploration_tokens &&
           routing_accuracy == o.routing_accuracy && false_positive_rate == o.false_positive_rate &&
           false_negative_rate == o.false_negative_rate && accuracy_delta == o.accuracy_delta &&
           accuracy_delta_ci.low == o.accuracy_delta_ci.low && accuracy_delta_ci.high == o.accuracy_delta_ci.high &&
           final_tau == o.final_tau;
  }
};

inline MetricsRow metrics_row(const bench::ComparisonRow& r) {
  MetricsRow m;
  m.baseline = bench::to_string(r.run.id);
  m.metrics = r.run.metrics;
  m.accuracy_ci = r.accuracy_ci;
  m.tokens_ci = r.tokens_ci;
  m.exploration_tokens = r.run.exploration_tokens;
  m.routing_accuracy = r.run.confusion.routing_accuracy;
  m.false_positive_rate = r.run.confusion.false_positive_rate;
  m.false_negative_rate = r.run.confusion.false_negative_rate;
  m.accuracy_delta = r.accuracy_delta_vs_fast;
  m.accuracy_delta_ci = r.accuracy_delta_ci;
  m.final_tau = r.run.final_tau;
  return m;
}

inline std::string serialize_metrics(const std::vector<MetricsRow>& rows) {
  CsvTable t;
  t.header = metrics_columns();
  for (const auto& m : rows) {
    const auto& k = m.metrics;
    std::vector<double> v = {k.accuracy,
                             m.accuracy_ci.low,
                             m.accuracy_ci.high,
                             k.consistency,
                             k.mean_tokens,
                             m.tokens_ci.low,
                             m.tokens_ci.high,
                             m.exploration_tokens,
                             k.mean_latency_s,
                             k.ece,
                             k.fast_fraction,
                             m.routing_accuracy,
                             m.false_positive_rate,
                             m.false_negative_rate,
                             m.accuracy_delta,
                             m.accuracy_delta_ci.low,
                             m.accuracy_delta_ci.high,
                             m.final_tau};
    std::vector<std::string> cells = {m.baseline};
    for (double x : v) cells.push_back(format_double(x));
    t.rows.push_back(std::move(cells));
  }
  return serialize_csv(t);
}

inline std::vector<MetricsRow> parse_metrics(const std::string& text) {
  const auto t = parse_csv(text);
  std::vector<std::size_t> idx;
  for (const auto& c : metrics_columns()) {
    const auto i = t.column(c);
    if (!i) throw InvalidInput("metrics table: missing column '" + c + "'");
    idx.push_back(*i);
  }
  std::vector<MetricsRow> rows;
  for (const auto& r : t.rows) {
    std::size_t k = 1;
    auto next = [&]() {
      const double v = parse_double(r[idx[k]], "metrics column " + metrics_columns()[k]);
      ++k;
      return v;
    };
    MetricsRow m;
    m.baseline = r[idx[0]];
    m.metrics.accuracy = next();
    m.accuracy_ci = {next(), next()};
    m.metrics.consistency = next();
    m.metrics.mean_tokens = next();
    m.tokens_ci = {next(), next()};
    m.exploration_tokens = next();
    m.metrics.mean_latency_s = next();
    m.metrics.ece = next();
    m.metrics.fast_fraction = next();
    m.routing_accuracy = next();
    m.false_positive_rate = next();
    m.false_negative_rate = next();
    m.accuracy_delta = next();
    m.accuracy_delta_ci = {next(), next()};
    m.final_tau = next();
    rows.push_back(std::move(m));
  }
  return rows;
}

// Overall and per-category routing confusion, one row per (baseline, scope).
inline std::string serialize_confusion(const bench::ComparisonTable& table) {
  CsvTable t;
  t.header = {"baseline", "scope", "routing_accuracy", "false_positive_rate", "false_negative_rate", "count"};
  for (const auto& row : table.rows) {
    const auto& c = row.run.confusion;
    std::size_t total = 0;
    for (const auto& [cat, cell] : c.per_category) total += cell.count;
    t.rows.push_back({bench::to_string(row.run.id), "all", format_double(c.routing_accuracy),
                      format_double(c.false_positive_rate), format_double(c.false_negative_rate),
                      std::to_string(total)});
    for (const auto& [cat, cell] : c.per_category)
      t.rows.push_back({bench::to_string(row.run.id), cat, format_double(cell.routing_accuracy),
                        format_double(cell.false_positive_rate), format_double(cell.false_negative_rate),
                        std::to_string(cell.count)});
  }
  return serialize_csv(t);
}

}  // namespace cdr::io
