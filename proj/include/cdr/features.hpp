#pragma once

// Per-query complexity features: correlation strength, domain crossing,
// stakeholder multiplicity and uncertainty level.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numeric>
#include <optional>
#include <string>
#include <tuple>
#include <variant>
#include <vector>

#include "cdr/errors.hpp"
#include "cdr/numeric/information.hpp"
#include "cdr/numeric/linalg.hpp"
#include "cdr/numeric/mlp.hpp"

namespace cdr::features {

using numeric::DiscreteJoint;
using numeric::RealVector;

struct QueryRecord {
  std::string id;
  std::vector<RealVector> concept_embeddings;
  std::uint64_t stakeholder_count = 0;
  std::vector<double> candidate_probs;
  // Analytic mode carries the joint; learned mode carries a query embedding.
  std::variant<DiscreteJoint, RealVector> correlation_input = RealVector{};
  std::optional<std::string> text;

  bool operator==(const QueryRecord&) const = default;
};

struct FeatureVector {
  double c_s = 0.0;
  double d_c = 1.0;
  double s_m = 0.0;
  double u_l = 0.0;

  static constexpr std::size_t size = 4;

  std::array<double, 4> as_array() const noexcept { return {c_s, d_c, s_m, u_l}; }
  double operator[](std::size_t i) const noexcept { return as_array()[i]; }

  bool operator==(const FeatureVector&) const = default;
};

inline constexpr const char* kFeatureNames[4] = {"c_s", "d_c", "s_m", "u_l"};

struct ClusterAssignment {
  std::vector<std::size_t> labels;
  std::size_t cluster_count = 0;

  bool operator==(const ClusterAssignment&) const = default;
};

struct ClusteringConfig {
  std::size_t min_cluster_size = 2;
  double merge_distance = 0.5;
};

struct CorrelationModel {
  numeric::MlpParams regressor;
};

// Error raised by extract_features, naming the dimension that failed.
class FeatureError : public InvalidInput {
 public:
  FeatureError(std::string dimension, const std::string& what)
      : InvalidInput(dimension + ": " + what), dimension_(std::move(dimension)) {}
  const std::string& dimension() const noexcept { return dimension_; }

 private:
  std::string dimension_;
};

inline double correlation_strength_exact(const DiscreteJoint& joint) {
  const double hy = numeric::entropy(joint.marginal_y());
  if (hy <= 0.0) throw DegenerateTarget("correlation strength: H(Y) = 0");
  return std::clamp(numeric::mi_exact(joint) / hy, 0.0, 1.0);
}

inline double correlation_strength_predict(const CorrelationModel& model, const RealVector& embedding) {
  if (embedding.size() != model.regressor.input_size())
    throw InvalidInput("correlation model expects embedding of dimension " +
                       std::to_string(model.regressor.input_size()));
  numeric::require_finite(embedding, "query embedding");
  const auto out = numeric::mlp_forward(model.regressor, embedding);
  return std::clamp(out.at(0), 0.0, 1.0);
}

// Fits the regressor on (embedding, c_s) pairs with squared error.
inline CorrelationModel fit_correlation_model(const std::vector<RealVector>& embeddings,
                                              const std::vector<double>& labels, std::size_t hidden,
                                              const numeric::TrainConfig& cfg) {
  if (embeddings.empty() || embeddings.size() != labels.size())
    throw InvalidInput("fit_correlation_model: need equally many embeddings and labels");
  numeric::SampleSet data;
  for (std::size_t i = 0; i < embeddings.size(); ++i) data.pairs.push_back({embeddings[i], {labels[i]}});
  auto net = numeric::MlpParams::random({data.x_dim(), hidden, 1}, numeric::Activation::tanh,
                                        numeric::Activation::sigmoid, cfg.seed, cfg.init_scale);
  return {numeric::mlp_train(std::move(net), data, numeric::Loss::squared_error, cfg)};
}

namespace detail {

struct DisjointSets {
  std::vector<std::size_t> parent;
  explicit DisjointSets(std::size_t n) : parent(n) { std::iota(parent.begin(), parent.end(), 0); }
  std::size_t find(std::size_t x) {
    while (parent[x] != x) x = parent[x] = parent[parent[x]];
    return x;
  }
  // Keeps the smaller root so labels stay index-ordered.
  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (b < a) std::swap(a, b);
    parent[b] = a;
  }
};

}  // namespace detail

// Single-linkage agglomeration: merge the closest pair (ties by index) while
// the linkage distance is <= merge_distance. Groups smaller than
// min_cluster_size are split back into singletons. Labels are assigned in
// order of each cluster's lowest member index.
inline ClusterAssignment cluster_concepts(const std::vector<RealVector>& embeddings, std::size_t min_cluster_size,
                                          double merge_distance) {
  if (embeddings.empty()) throw InvalidInput("cluster_concepts: no embeddings");
  if (min_cluster_size == 0) throw InvalidInput("cluster_concepts: min_cluster_size must be positive");
  if (!(merge_distance > 0.0)) throw InvalidInput("cluster_concepts: merge_distance must be positive");
  const std::size_t n = embeddings.size();
  for (const auto& e : embeddings) {
    if (e.size() != embeddings.front().size()) throw InvalidInput("cluster_concepts: mixed embedding dimensions");
    numeric::require_finite(e, "concept embedding");
  }

  std::vector<std::tuple<double, std::size_t, std::size_t>> edges;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = numeric::euclidean_distance(embeddings[i], embeddings[j]);
      if (d <= merge_distance) edges.emplace_back(d, i, j);
    }
  std::sort(edges.begin(), edges.end());
  detail::DisjointSets sets(n);
  for (const auto& [d, i, j] : edges) sets.unite(i, j);

  std::vector<std::size_t> group_size(n, 0);
  for (std::size_t i = 0; i < n; ++i) ++group_size[sets.find(i)];

  ClusterAssignment out;
  out.labels.assign(n, 0);
  std::vector<std::size_t> label_of_root(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t root = sets.find(i);
    if (group_size[root] < min_cluster_size) {
      out.labels[i] = out.cluster_count++;
      continue;
    }
    if (label_of_root[root] == n) label_of_root[root] = out.cluster_count++;
    out.labels[i] = label_of_root[root];
  }
  return out;
}

inline double domain_crossing(const ClusterAssignment& assignment, std::size_t concept_count) {
  if (concept_count == 0 || concept_count != assignment.labels.size())
    throw InvalidInput("domain_crossing: concept_count must equal the number of labels");
  if (assignment.cluster_count == 0 || assignment.cluster_count > concept_count)
    throw InvalidInput("domain_crossing: cluster count out of range");
  return static_cast<double>(assignment.cluster_count) / static_cast<double>(concept_count);
}

inline double stakeholder_multiplicity(std::uint64_t count) { return std::log1p(static_cast<double>(count)); }

inline double uncertainty_level(const std::vector<double>& candidate_probs) {
  numeric::validate_distribution(candidate_probs, "candidate_probs");
  return 1.0 - *std::max_element(candidate_probs.begin(), candidate_probs.end());
}

inline FeatureVector extract_features(const QueryRecord& query, const CorrelationModel* model,
                                      const ClusteringConfig& clustering = {}) {
  FeatureVector f;
  try {
    if (const auto* joint = std::get_if<DiscreteJoint>(&query.correlation_input)) {
      f.c_s = correlation_strength_exact(*joint);
    } else {
      if (model == nullptr) throw InvalidInput("embedding correlation input requires a correlation model");
      f.c_s = correlation_strength_predict(*model, std::get<RealVector>(query.correlation_input));
    }
  } catch (const std::exception& e) {
    throw FeatureError("c_s", e.what());
  }
  try {
    const auto assignment =
        cluster_concepts(query.concept_embeddings, clustering.min_cluster_size, clustering.merge_distance);
    f.d_c = domain_crossing(assignment, query.concept_embeddings.size());
  } catch (const std::exception& e) {
    throw FeatureError("d_c", e.what());
  }
  f.s_m = stakeholder_multiplicity(query.stakeholder_count);
  try {
    f.u_l = uncertainty_level(query.candidate_probs);
  } catch (const std::exception& e) {
    throw FeatureError("u_l", e.what());
  }
  return f;
}

inline FeatureVector extract_features(const QueryRecord& query, const std::optional<CorrelationModel>& model,
                                      const ClusteringConfig& clustering = {}) {
  return extract_features(query, model ? &*model : nullptr, clustering);
}

}  // namespace cdr::features
