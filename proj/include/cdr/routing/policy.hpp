#pragma once

// Scoring policies that map a FeatureVector to a scalar compared against tau.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "cdr/errors.hpp"
#include "cdr/features.hpp"
#include "cdr/numeric/mlp.hpp"

namespace cdr::routing {

using features::FeatureVector;

struct LinearPolicy {
  std::array<double, 4> weights{};  // c_s, d_c, s_m, u_l

  bool operator==(const LinearPolicy&) const = default;
};

struct NeuralPolicy {
  numeric::MlpParams net;  // 4 inputs, one sigmoid output

  bool operator==(const NeuralPolicy&) const = default;
};

struct TreeNode {
  int feature = -1;  // -1 marks a leaf
  double threshold = 0.0;
  std::size_t left = 0;
  std::size_t right = 0;
  double score = 0.0;  // leaves only

  bool is_leaf() const noexcept { return feature < 0; }
  bool operator==(const TreeNode&) const = default;
};

// Root is nodes[0]; children always sit at larger indices than their parent.
struct TreePolicy {
  std::vector<TreeNode> nodes;
  std::size_t max_depth = 1;

  static TreePolicy leaf(double score, std::size_t max_depth = 1) {
    TreePolicy t;
    t.nodes.push_back(TreeNode{.score = score});
    t.max_depth = max_depth;
    return t;
  }

  bool operator==(const TreePolicy&) const = default;
};

using Policy = std::variant<LinearPolicy, NeuralPolicy, TreePolicy>;

inline const char* policy_kind(const Policy& p) {
  switch (p.index()) {
    case 0: return "linear";
    case 1: return "neural";
    default: return "tree";
  }
}

inline void validate(const LinearPolicy& p) {
  if (!numeric::all_finite(p.weights)) throw InvalidPolicy("linear policy: non-finite weight");
}

inline void validate(const NeuralPolicy& p) {
  try {
    p.net.validate();
  } catch (const InvalidInput& e) {
    throw InvalidPolicy(std::string("neural policy: ") + e.what());
  }
  if (p.net.input_size() != 4) throw InvalidPolicy("neural policy: input layer must have 4 units");
  if (p.net.output_size() != 1 || p.net.output != numeric::Activation::sigmoid)
    throw InvalidPolicy("neural policy: output must be a single sigmoid unit");
}

inline void validate(const TreePolicy& t) {
  if (t.nodes.empty()) throw InvalidPolicy("tree policy: no nodes");
  if (t.max_depth == 0) throw InvalidPolicy("tree policy: max_depth must be positive");
  std::vector<std::size_t> depth(t.nodes.size(), 0);
  std::vector<int> seen(t.nodes.size(), 0);
  seen[0] = 1;
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const auto& n = t.nodes[i];
    if (!seen[i]) throw InvalidPolicy("tree policy: node " + std::to_string(i) + " unreachable");
    if (n.is_leaf()) {
      if (!(n.score >= 0.0 && n.score <= 1.0)) throw InvalidPolicy("tree policy: leaf score outside [0,1]");
      continue;
    }
    if (n.feature > 3) throw InvalidPolicy("tree policy: feature index out of range");
    if (!std::isfinite(n.threshold)) throw InvalidPolicy("tree policy: non-finite threshold");
    for (std::size_t child : {n.left, n.right}) {
      if (child <= i || child >= t.nodes.size()) throw InvalidPolicy("tree policy: bad child index");
      if (seen[child]++) throw InvalidPolicy("tree policy: node with two parents");
      depth[child] = depth[i] + 1;
      if (depth[child] > t.max_depth) throw InvalidPolicy("tree policy: deeper than max_depth");
    }
  }
}

inline void validate(const Policy& p) {
  std::visit([](const auto& q) { validate(q); }, p);
}

// alpha1 c_s + alpha2 d_c + alpha3 s_m + alpha4 u_l
inline double score_linear(const LinearPolicy& p, const FeatureVector& f) noexcept {
  return p.weights[0] * f.c_s + p.weights[1] * f.d_c + p.weights[2] * f.s_m + p.weights[3] * f.u_l;
}

inline double score_neural(const NeuralPolicy& p, const FeatureVector& f) {
  if (p.net.input_size() != 4) throw InvalidInput("neural policy: input layer must have 4 units");
  const auto x = f.as_array();
  return numeric::mlp_forward(p.net, x).at(0);
}

inline double score_tree(const TreePolicy& t, const FeatureVector& f) {
  if (t.nodes.empty()) throw InvalidPolicy("tree policy: no nodes");
  const auto x = f.as_array();
  std::size_t i = 0;
  for (std::size_t steps = 0; steps <= t.nodes.size(); ++steps) {
    const auto& n = t.nodes[i];
    if (n.is_leaf()) return n.score;
    if (n.feature > 3) throw InvalidPolicy("tree policy: feature index out of range");
    const std::size_t next = x[static_cast<std::size_t>(n.feature)] < n.threshold ? n.left : n.right;
    if (next <= i || next >= t.nodes.size()) throw InvalidPolicy("tree policy: bad child index");
    i = next;
  }
  throw InvalidPolicy("tree policy: cycle");
}

inline double score(const Policy& p, const FeatureVector& f) {
  switch (p.index()) {
    case 0: return score_linear(std::get<0>(p), f);
    case 1: return score_neural(std::get<1>(p), f);
    default: return score_tree(std::get<2>(p), f);
  }
}

}  // namespace cdr::routing
