#pragma once

// Fitting routing policies from (features, fast/slow) labels.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <vector>

#include "cdr/errors.hpp"
#include "cdr/numeric/mlp.hpp"
#include "cdr/random.hpp"
#include "cdr/routing/policy.hpp"
#include "cdr/strategy.hpp"

namespace cdr::routing {

struct LabeledFeatures {
  FeatureVector features;
  Strategy label = Strategy::Fast;
};

inline void require_both_labels(const std::vector<LabeledFeatures>& data, const char* who) {
  if (data.empty()) throw InvalidInput(std::string(who) + ": no training data");
  const auto slow = std::count_if(data.begin(), data.end(), [](const auto& d) { return d.label == Strategy::Slow; });
  if (slow == 0 || static_cast<std::size_t>(slow) == data.size())
    throw DegenerateLabels(std::string(who) + ": training data contains a single class");
}

// Logistic regression P(slow) = sigmoid(w.x - tau), fitted by seeded
// mini-batch gradient descent. The intercept is pinned to -tau so that
// score_linear >= tau exactly when P(slow) >= 1/2.
inline LinearPolicy fit_linear(const std::vector<LabeledFeatures>& data, const numeric::TrainConfig& cfg,
                               double tau = 0.5) {
  cfg.validate();
  require_both_labels(data, "fit_linear");
  LinearPolicy p;
  const std::uint64_t init_key = combine_key(cfg.seed, 0x11a);
  for (std::size_t k = 0; k < 4; ++k) p.weights[k] = cfg.init_scale * (2.0 * CounterRng::uniform_at(init_key, k) - 1.0);

  const std::size_t n = data.size();
  const std::size_t bs = std::min(cfg.batch_size, n);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    CounterRng rng(cfg.seed, {0x11b, epoch});
    const auto order = random_permutation(n, rng);
    for (std::size_t start = 0; start < n; start += bs) {
      const std::size_t end = std::min(n, start + bs);
      std::array<double, 4> g{};
      for (std::size_t k = start; k < end; ++k) {
        const auto& d = data[order[k]];
        const auto x = d.features.as_array();
        const double y = d.label == Strategy::Slow ? 1.0 : 0.0;
        const double err = numeric::sigmoid(score_linear(p, d.features) - tau) - y;
        for (std::size_t j = 0; j < 4; ++j) g[j] += err * x[j];
      }
      const double scale = cfg.learning_rate / static_cast<double>(end - start);
      for (std::size_t j = 0; j < 4; ++j) p.weights[j] -= scale * g[j];
    }
    if (!numeric::all_finite(p.weights)) throw TrainingDiverged(epoch);
  }
  return p;
}

// 4 -> hidden -> 1 tanh/sigmoid network trained with binary cross-entropy.
inline NeuralPolicy fit_neural(const std::vector<LabeledFeatures>& data, std::size_t hidden,
                               const numeric::TrainConfig& cfg) {
  require_both_labels(data, "fit_neural");
  numeric::SampleSet set;
  set.pairs.reserve(data.size());
  for (const auto& d : data) {
    const auto x = d.features.as_array();
    set.pairs.push_back({{x.begin(), x.end()}, {d.label == Strategy::Slow ? 1.0 : 0.0}});
  }
  auto net = numeric::MlpParams::random({4, hidden, 1}, numeric::Activation::tanh, numeric::Activation::sigmoid,
                                        cfg.seed, cfg.init_scale);
  return {numeric::mlp_train(std::move(net), set, numeric::Loss::binary_cross_entropy, cfg)};
}

namespace detail {

struct SplitCounts {
  std::int64_t l_fast = 0, l_slow = 0, r_fast = 0, r_slow = 0;
};

// Compares Gini purity sums (l0^2+l1^2)/nL + (r0^2+r1^2)/nR exactly.
// Larger is better (lower weighted impurity). Returns <0, 0, >0.
inline int compare_purity(const SplitCounts& a, const SplitCounts& b) {
  using i128 = __int128;
  const i128 anl = a.l_fast + a.l_slow, anr = a.r_fast + a.r_slow;
  const i128 bnl = b.l_fast + b.l_slow, bnr = b.r_fast + b.r_slow;
  const i128 anum = (i128(a.l_fast) * a.l_fast + i128(a.l_slow) * a.l_slow) * anr +
                    (i128(a.r_fast) * a.r_fast + i128(a.r_slow) * a.r_slow) * anl;
  const i128 bnum = (i128(b.l_fast) * b.l_fast + i128(b.l_slow) * b.l_slow) * bnr +
                    (i128(b.r_fast) * b.r_fast + i128(b.r_slow) * b.r_slow) * bnl;
  const i128 lhs = anum * (bnl * bnr);
  const i128 rhs = bnum * (anl * anr);
  return lhs < rhs ? -1 : (lhs > rhs ? 1 : 0);
}

inline std::size_t grow(const std::vector<LabeledFeatures>& data, std::vector<std::size_t> idx, std::size_t depth,
                        std::size_t max_depth, std::vector<TreeNode>& nodes) {
  const std::size_t me = nodes.size();
  nodes.emplace_back();
  std::int64_t slow = 0;
  for (auto i : idx) slow += data[i].label == Strategy::Slow;
  const auto total = static_cast<std::int64_t>(idx.size());
  const auto make_leaf = [&] {
    nodes[me] = TreeNode{.score = static_cast<double>(slow) / static_cast<double>(total)};
    return me;
  };
  if (depth >= max_depth || slow == 0 || slow == total) return make_leaf();

  bool found = false;
  int best_feature = -1;
  double best_threshold = 0.0;
  SplitCounts best;
  std::vector<std::pair<double, bool>> column(idx.size());
  for (int f = 0; f < 4; ++f) {
    for (std::size_t k = 0; k < idx.size(); ++k)
      column[k] = {data[idx[k]].features[static_cast<std::size_t>(f)], data[idx[k]].label == Strategy::Slow};
    std::sort(column.begin(), column.end());
    SplitCounts c{0, 0, total - slow, slow};
    for (std::size_t k = 0; k + 1 < column.size(); ++k) {
      if (column[k].second) {
        ++c.l_slow;
        --c.r_slow;
      } else {
        ++c.l_fast;
        --c.r_fast;
      }
      if (column[k].first == column[k + 1].first) continue;
      // Thresholds ascend within a feature, so strict improvement keeps the smallest.
      if (!found || compare_purity(c, best) > 0) {
        found = true;
        best = c;
        best_feature = f;
        best_threshold = (column[k].first + column[k + 1].first) / 2.0;
        // Adjacent doubles can round the midpoint down onto the lower value.
        if (!(best_threshold > column[k].first)) best_threshold = column[k + 1].first;
      }
    }
  }
  if (!found) return make_leaf();

  std::vector<std::size_t> left, right;
  for (auto i : idx) {
    (data[i].features[static_cast<std::size_t>(best_feature)] < best_threshold ? left : right).push_back(i);
  }
  idx.clear();
  idx.shrink_to_fit();
  const std::size_t l = grow(data, std::move(left), depth + 1, max_depth, nodes);
  const std::size_t r = grow(data, std::move(right), depth + 1, max_depth, nodes);
  nodes[me] = TreeNode{.feature = best_feature, .threshold = best_threshold, .left = l, .right = r};
  return me;
}

}  // namespace detail

// Greedy CART with Gini impurity. Candidate thresholds are midpoints of
// consecutive distinct sorted values; ties go to the lowest feature index,
// then the smallest threshold. Impure nodes split even at zero gain so that
// deeper trees can resolve interactions such as XOR. Leaves score the slow
// fraction of their training points.
inline TreePolicy fit_tree(const std::vector<LabeledFeatures>& data, std::size_t max_depth) {
  if (data.empty()) throw InvalidInput("fit_tree: no training data");
  if (max_depth == 0) throw InvalidInput("fit_tree: max_depth must be positive");
  std::vector<std::size_t> idx(data.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = i;
  TreePolicy t;
  t.max_depth = max_depth;
  detail::grow(data, std::move(idx), 0, max_depth, t.nodes);
  return t;
}

// Fraction of points whose decision (score >= tau means slow) matches the label.
inline double training_accuracy(const Policy& p, const std::vector<LabeledFeatures>& data, double tau = 0.5) {
  if (data.empty()) return 0.0;
  std::size_t ok = 0;
  for (const auto& d : data) {
    const Strategy s = score(p, d.features) < tau ? Strategy::Fast : Strategy::Slow;
    ok += s == d.label;
  }
  return static_cast<double>(ok) / static_cast<double>(data.size());
}

}  // namespace cdr::routing
