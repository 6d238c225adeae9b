#pragma once

// The cdr command-line tool: simulate, route, train-policy, report.
// Needs CLI11, fmt and spdlog in addition to the core headers.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <spdlog/sinks/stdout_sinks.h>
#include <spdlog/spdlog.h>

#include "cdr/bench/corpus.hpp"
#include "cdr/bench/runner.hpp"
#include "cdr/features.hpp"
#include "cdr/io/config.hpp"
#include "cdr/io/serialize.hpp"
#include "cdr/pipeline.hpp"
#include "cdr/routing/fit.hpp"
#include "cdr/routing/threshold.hpp"

namespace cdr::cli {

namespace fs = std::filesystem;

enum ExitCode : int { kOk = 0, kValidationError = 2, kRuntimeError = 3, kIoError = 4 };

// Malformed or unusable input data (as opposed to a bad configuration).
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Runs f, reclassifying argument errors raised while reading data files.
template <typename F>
auto reading(const std::string& what, F&& f) {
  try {
    return f();
  } catch (const std::invalid_argument& e) {
    throw DataError(what + ": " + e.what());
  }
}

struct GlobalOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
};

// CDR_LOG selects verbosity only; an unrecognised value falls back to warn.
inline void configure_logging() {
  auto logger = spdlog::stderr_logger_mt("cdr");
  logger->set_pattern("[%l] %v");
  spdlog::set_default_logger(logger);
  spdlog::set_level(spdlog::level::warn);
  if (const char* env = std::getenv("CDR_LOG")) {
    const std::string level = env;
    if (level == "error") spdlog::set_level(spdlog::level::err);
    else if (level == "warn") spdlog::set_level(spdlog::level::warn);
    else if (level == "info") spdlog::set_level(spdlog::level::info);
    else if (level == "debug") spdlog::set_level(spdlog::level::debug);
    else spdlog::warn("CDR_LOG='{}' not recognised; expected error, warn, info or debug", level);
  }
}

inline io::AppConfig load_config(const GlobalOptions& g) {
  io::AppConfig cfg;
  if (g.config_path) {
    spdlog::info("reading config {}", *g.config_path);
    cfg = io::parse_config(io::read_text_file(*g.config_path));
  }
  if (g.seed) cfg.seed = *g.seed;
  if (g.out) cfg.out = *g.out;
  cfg.resolve_seeds();
  cfg.validate();
  spdlog::debug("master seed {}, output directory {}", cfg.seed, cfg.out);
  return cfg;
}

// ---------------------------------------------------------------- simulate

inline int cmd_simulate(const GlobalOptions& g) {
  const auto cfg = load_config(g);
  const fs::path out = cfg.out;
  io::ensure_directory(out);

  spdlog::info("training policies on {} queries, then running {} baselines on {} queries x {} repeats",
               cfg.train_queries, cfg.baselines.size(), cfg.corpus.n_queries, cfg.bench.repeats);
  const auto result = run_simulation(cfg);
  const auto& corpus = result.corpus;
  const auto& policies = result.trained.policies;
  for (std::size_t k = 0; k < 3; ++k)
    spdlog::info("{} policy training accuracy {:.4f}", k == 0 ? "linear" : k == 1 ? "neural" : "tree",
                 result.trained.training_accuracy[k]);

  std::vector<io::MetricsRow> rows;
  for (const auto& row : result.table.rows) rows.push_back(io::metrics_row(row));
  const auto emit = [&](const char* name, const std::string& content) {
    io::write_text_file(out / name, content);
    spdlog::debug("wrote {} ({} bytes)", (out / name).string(), content.size());
  };
  emit("corpus.jsonl", io::serialize_corpus(corpus));
  emit("policy_linear.json", io::serialize_policy(*policies.linear));
  emit("policy_neural.json", io::serialize_policy(*policies.neural));
  emit("policy_tree.json", io::serialize_policy(*policies.tree));
  emit("metrics.csv", io::serialize_metrics(rows));
  emit("confusion.csv", io::serialize_confusion(result.table));
  emit("manifest.json", io::manifest_json(cfg).dump(2) + "\n");

  if (!g.quiet) {
    fmt::print("{:<18} {:>8} {:>11} {:>8} {:>10} {:>8}\n", "baseline", "accuracy", "consistency", "tokens",
               "fast_frac", "routing");
    for (const auto& m : rows)
      fmt::print("{:<18} {:>8.4f} {:>11.4f} {:>8.1f} {:>10.3f} {:>8.4f}\n", m.baseline, m.metrics.accuracy,
                 m.metrics.consistency, m.metrics.mean_tokens, m.metrics.fast_fraction, m.routing_accuracy);
    fmt::print("oracle: argmax of accuracy - {} x kilotokens (a modelling choice)\n", cfg.utility.lambda_cost);
    fmt::print("artifacts written to {}\n", out.string());
  }
  return kOk;
}

// ---------------------------------------------------------------- route

struct RouteOptions {
  std::string queries;
  std::string policy;
  std::optional<std::string> output;
  std::optional<double> tau;
  std::optional<std::string> correlation_model;
  bool continue_on_error = false;
};

inline int cmd_route(const GlobalOptions& g, const RouteOptions& o) {
  const auto cfg = load_config(g);
  const double tau = o.tau.value_or(cfg.bench.threshold.tau0);
  if (!std::isfinite(tau)) throw InvalidInput("--tau must be finite");
  const auto policy = reading(o.policy, [&] { return io::parse_policy(io::read_text_file(o.policy)); });
  std::optional<features::CorrelationModel> model;
  if (o.correlation_model) {
    model = reading(*o.correlation_model, [&] {
      const auto j = io::detail::parse_json(io::read_text_file(*o.correlation_model), "correlation model");
      return features::CorrelationModel{io::mlp_from_json(j, "correlation_model")};
    });
  }
  const fs::path output = o.output ? fs::path(*o.output) : fs::path(cfg.out) / "decisions.jsonl";

  const auto lines = io::split_lines(io::read_text_file(o.queries));
  std::string out;
  std::set<std::string> seen;
  std::size_t decided = 0, failures = 0;
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const std::size_t line_no = i + 1;
    try {
      const auto q = io::parse_query_line(lines[i]);
      if (!seen.insert(q.id).second) throw InvalidInput("duplicate id '" + q.id + "'");
      const auto f = features::extract_features(q, model, cfg.bench.clustering);
      const auto d = routing::route(routing::score(policy, f), tau, f);
      out += io::to_json(io::DecisionRecord{q.id, d}).dump() + "\n";
      ++decided;
    } catch (const std::exception& e) {
      if (!o.continue_on_error) throw DataError(o.queries + " line " + std::to_string(line_no) + ": " + e.what());
      spdlog::warn("{} line {}: {}", o.queries, line_no, e.what());
      out += io::error_sentinel(line_no, e.what()) + "\n";
      ++failures;
    }
  }
  if (output.has_parent_path()) io::ensure_directory(output.parent_path());
  io::write_text_file(output, out);
  if (!g.quiet) fmt::print("{} decisions, {} errors -> {}\n", decided, failures, output.string());
  return kOk;
}

// ---------------------------------------------------------------- train-policy

struct TrainOptions {
  std::string corpus;
  std::optional<std::string> kind;
  std::optional<std::string> output;
  std::optional<double> learning_rate;
  std::optional<std::size_t> epochs;
  std::optional<std::size_t> batch_size;
  std::optional<std::size_t> hidden;
  std::optional<std::size_t> max_depth;
};

inline int cmd_train_policy(const GlobalOptions& g, const TrainOptions& o) {
  auto cfg = load_config(g);
  const std::string kind = o.kind.value_or(cfg.policy_kind);
  auto apply = [&](numeric::TrainConfig& t) {
    if (o.learning_rate) t.learning_rate = *o.learning_rate;
    if (o.epochs) t.epochs = *o.epochs;
    if (o.batch_size) t.batch_size = *o.batch_size;
  };
  apply(cfg.policy.linear);
  apply(cfg.policy.neural);
  if (o.hidden) cfg.policy.neural_hidden = *o.hidden;
  if (o.max_depth) cfg.policy.tree_depth = *o.max_depth;
  cfg.policy.validate();

  const auto data = reading(o.corpus, [&] {
    const auto corpus = io::parse_corpus(io::read_text_file(o.corpus));
    if (corpus.empty()) throw InvalidInput("corpus is empty");
    return bench::labeled_features(corpus, bench::extract_all(corpus, cfg.bench.clustering));
  });

  routing::Policy policy;
  if (kind == "linear") {
    auto t = cfg.policy.linear;
    t.seed = combine_key(cfg.seed, 1);
    policy = routing::fit_linear(data, t, cfg.bench.threshold.tau0);
  } else if (kind == "neural") {
    auto t = cfg.policy.neural;
    t.seed = combine_key(cfg.seed, 2);
    policy = routing::fit_neural(data, cfg.policy.neural_hidden, t);
  } else if (kind == "tree") {
    policy = routing::fit_tree(data, cfg.policy.tree_depth);
  } else {
    throw InvalidInput("--kind must be one of linear, neural, tree");
  }

  const fs::path output = o.output ? fs::path(*o.output) : fs::path(cfg.out) / ("policy_" + kind + ".json");
  if (output.has_parent_path()) io::ensure_directory(output.parent_path());
  io::write_text_file(output, io::serialize_policy(policy));
  const double acc = routing::training_accuracy(policy, data, cfg.bench.threshold.tau0);
  if (!g.quiet) fmt::print("training_accuracy {}\n", io::format_double(acc));
  spdlog::info("wrote {} policy to {}", kind, output.string());
  return kOk;
}

// ---------------------------------------------------------------- report

struct ReportOptions {
  std::string metrics;
  std::optional<std::string> plot;
};

struct ReportRow {
  std::string baseline;
  double accuracy = 0.0;
  double tokens = 0.0;
};

inline std::string render_plot(const std::vector<ReportRow>& rows) {
  const double w = 640, h = 420, left = 70, right = 170, top = 30, bottom = 50;
  double x0 = rows.front().tokens, x1 = x0, y0 = rows.front().accuracy, y1 = y0;
  for (const auto& r : rows) {
    x0 = std::min(x0, r.tokens);
    x1 = std::max(x1, r.tokens);
    y0 = std::min(y0, r.accuracy);
    y1 = std::max(y1, r.accuracy);
  }
  const double xpad = std::max(1.0, 0.05 * (x1 - x0)), ypad = std::max(0.005, 0.05 * (y1 - y0));
  x0 -= xpad, x1 += xpad, y0 -= ypad, y1 += ypad;
  auto px = [&](double x) { return left + (x - x0) / (x1 - x0) * (w - left - right); };
  auto py = [&](double y) { return h - bottom - (y - y0) / (y1 - y0) * (h - top - bottom); };
  std::string s = fmt::format(
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{}\" height=\"{}\" font-family=\"sans-serif\" "
      "font-size=\"12\">\n<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n",
      w, h);
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", left, h - bottom, w - right,
                   h - bottom);
  s += fmt::format("<line x1=\"{}\" y1=\"{}\" x2=\"{}\" y2=\"{}\" stroke=\"black\"/>\n", left, top, left, h - bottom);
  s += fmt::format("<text x=\"{}\" y=\"{}\" text-anchor=\"middle\">mean tokens per query</text>\n",
                   (left + w - right) / 2, h - 12);
  s += fmt::format("<text x=\"16\" y=\"{}\" transform=\"rotate(-90 16 {})\" text-anchor=\"middle\">accuracy</text>\n",
                   (top + h - bottom) / 2, (top + h - bottom) / 2);
  for (int k = 0; k <= 4; ++k) {
    const double xv = x0 + (x1 - x0) * k / 4, yv = y0 + (y1 - y0) * k / 4;
    s += fmt::format("<text x=\"{:.1f}\" y=\"{}\" text-anchor=\"middle\">{:.0f}</text>\n", px(xv), h - bottom + 16, xv);
    s += fmt::format("<text x=\"{}\" y=\"{:.1f}\" text-anchor=\"end\">{:.3f}</text>\n", left - 6, py(yv) + 4, yv);
  }
  for (const auto& r : rows) {
    s += fmt::format("<circle cx=\"{:.1f}\" cy=\"{:.1f}\" r=\"4\" fill=\"steelblue\"/>\n", px(r.tokens), py(r.accuracy));
    s += fmt::format("<text x=\"{:.1f}\" y=\"{:.1f}\">{}</text>\n", px(r.tokens) + 7, py(r.accuracy) + 4, r.baseline);
  }
  return s + "</svg>\n";
}

inline int cmd_report(const GlobalOptions& g, const ReportOptions& o) {
  const auto t = reading(o.metrics, [&] { return io::parse_csv(io::read_text_file(o.metrics)); });
  const auto col_base = t.column("baseline"), col_acc = t.column("accuracy"), col_tok = t.column("mean_tokens");
  if (!col_base || !col_acc || !col_tok)
    throw DataError(o.metrics + ": metrics table needs baseline, accuracy and mean_tokens columns");
  const auto& known = io::metrics_columns();
  std::vector<std::size_t> unknown;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (std::find(known.begin(), known.end(), t.header[c]) == known.end()) {
      spdlog::warn("{}: unknown column '{}' passed through", o.metrics, t.header[c]);
      unknown.push_back(c);
    }

  std::vector<ReportRow> rows;
  std::optional<double> slow_tokens;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    const auto& r = t.rows[i];
    const std::string where = o.metrics + " row " + std::to_string(i + 1);
    const ReportRow row = reading(where, [&] {
      return ReportRow{r[*col_base], io::parse_double(r[*col_acc], "accuracy"),
                       io::parse_double(r[*col_tok], "mean_tokens")};
    });
    if (row.baseline == "uniform_slow") slow_tokens = row.tokens;
    rows.push_back(row);
  }
  if (rows.empty()) throw DataError(o.metrics + ": metrics table has no rows");
  const bool savings = slow_tokens && rows.size() >= 2 && *slow_tokens > 0.0;

  auto cell = [&](std::size_t row, const char* name) -> std::string {
    const auto c = t.column(name);
    return c ? t.rows[row][*c] : "";
  };
  auto ci = [&](std::size_t row, const char* lo, const char* hi) -> std::string {
    const auto a = t.column(lo), b = t.column(hi);
    if (!a || !b) return "";
    return reading(o.metrics, [&] {
      return fmt::format("[{:.4f}, {:.4f}]", io::parse_double(t.rows[row][*a], lo), io::parse_double(t.rows[row][*b], hi));
    });
  };

  std::vector<std::vector<std::string>> table;
  std::vector<std::string> header = {"baseline", "accuracy", "accuracy 95% CI", "consistency", "tokens",
                                     "tokens 95% CI"};
  if (savings) header.push_back("savings vs slow");
  for (auto c : unknown) header.push_back(t.header[c]);
  table.push_back(header);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    std::vector<std::string> line = {rows[i].baseline, fmt::format("{:.4f}", rows[i].accuracy),
                                     ci(i, "accuracy_ci_low", "accuracy_ci_high"), "",
                                     fmt::format("{:.1f}", rows[i].tokens), ci(i, "tokens_ci_low", "tokens_ci_high")};
    const auto cons = cell(i, "consistency");
    if (!cons.empty())
      line[3] = reading(o.metrics, [&] { return fmt::format("{:.4f}", io::parse_double(cons, "consistency")); });
    if (savings) line.push_back(fmt::format("{:.1f}%", 100.0 * (1.0 - rows[i].tokens / *slow_tokens)));
    for (auto c : unknown) line.push_back(t.rows[i][c]);
    table.push_back(std::move(line));
  }
  std::vector<std::size_t> width(header.size(), 0);
  for (const auto& line : table)
    for (std::size_t c = 0; c < line.size(); ++c) width[c] = std::max(width[c], line[c].size());
  if (!g.quiet) {
    for (const auto& line : table) {
      std::string s;
      for (std::size_t c = 0; c < line.size(); ++c)
        s += c == 0 ? fmt::format("{:<{}}", line[c], width[c]) : fmt::format("  {:>{}}", line[c], width[c]);
      fmt::print("{}\n", s);
    }
    if (t.column("routing_accuracy"))
      fmt::print("reference routing figures: accuracy 0.873, false positive 0.082, false negative 0.045 "
                 "(annotation only)\n");
  }
  if (o.plot) {
    io::write_text_file(*o.plot, render_plot(rows));
    spdlog::info("wrote plot {}", *o.plot);
  }
  return kOk;
}

// ---------------------------------------------------------------- entry point

inline int run(int argc, char** argv) {
  configure_logging();
  CLI::App app{"Cognitive decision routing: feature extraction, fast/slow routing and a simulation benchmark"};
  app.require_subcommand(1);
  app.fallthrough();
  GlobalOptions g;
  app.add_option("--config", g.config_path, "JSON configuration file");
  app.add_option("--seed", g.seed, "master seed (overrides the config)");
  app.add_option("--out", g.out, "output directory (overrides the config)");
  app.add_flag("--quiet", g.quiet, "suppress summaries on standard output");

  auto* sim = app.add_subcommand("simulate", "generate a corpus, train policies and benchmark every baseline");

  RouteOptions ro;
  auto* route = app.add_subcommand("route", "route a JSON-lines query file with a saved policy");
  route->add_option("--queries", ro.queries, "query file, one JSON object per line")->required();
  route->add_option("--policy", ro.policy, "policy file")->required();
  route->add_option("--output", ro.output, "decision file (default: <out>/decisions.jsonl)");
  route->add_option("--tau", ro.tau, "static routing threshold (default: threshold.tau0)");
  route->add_option("--correlation-model", ro.correlation_model, "network for queries given as embeddings");
  route->add_flag("--continue-on-error", ro.continue_on_error, "write an error line for bad input and keep going");

  TrainOptions to;
  auto* train = app.add_subcommand("train-policy", "fit a routing policy on a labelled corpus file");
  train->add_option("--corpus", to.corpus, "corpus file with oracle labels")->required();
  train->add_option("--kind", to.kind, "linear, neural or tree (default: policy.kind)");
  train->add_option("--output", to.output, "policy file (default: <out>/policy_<kind>.json)");
  train->add_option("--learning-rate", to.learning_rate, "learning rate for linear/neural");
  train->add_option("--epochs", to.epochs, "epochs for linear/neural");
  train->add_option("--batch-size", to.batch_size, "mini-batch size for linear/neural");
  train->add_option("--hidden", to.hidden, "hidden units for neural");
  train->add_option("--max-depth", to.max_depth, "depth limit for tree");

  ReportOptions rep;
  auto* report = app.add_subcommand("report", "print a comparison table from a metrics file");
  report->add_option("metrics", rep.metrics, "metrics.csv written by simulate")->required();
  report->add_option("--plot", rep.plot, "write an accuracy-vs-tokens SVG plot");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kOk : kValidationError;
  }

  try {
    if (*sim) return cmd_simulate(g);
    if (*route) return cmd_route(g, ro);
    if (*train) return cmd_train_policy(g, to);
    if (*report) return cmd_report(g, rep);
  } catch (const IoError& e) {
    spdlog::error("{}", e.what());
    return kIoError;
  } catch (const std::invalid_argument& e) {
    spdlog::error("{}", e.what());
    return kValidationError;
  } catch (const std::exception& e) {
    spdlog::error("{}", e.what());
    return kRuntimeError;
  }
  return kValidationError;
}

}  // namespace cdr::cli
