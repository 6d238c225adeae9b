#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "cdr/errors.hpp"
#include "cdr/features.hpp"
#include "cdr/numeric/information.hpp"
#include "cdr/random.hpp"
#include "oracles.hpp"

using namespace cdr;
using namespace cdr::features;

namespace {

DiscreteJoint random_joint(std::size_t rows, std::size_t cols, CounterRng& rng) {
  std::vector<double> p(rows * cols);
  double total = 0.0;
  for (auto& v : p) total += v = rng.uniform() < 0.2 ? 0.0 : rng.uniform(0.01, 1.0);
  if (total == 0.0) p[0] = total = 1.0;
  for (auto& v : p) v /= total;
  return DiscreteJoint(rows, cols, std::move(p));
}

std::vector<RealVector> random_points(std::size_t n, std::size_t dim, CounterRng& rng) {
  std::vector<RealVector> pts(n, RealVector(dim));
  for (auto& p : pts)
    for (auto& v : p) v = rng.uniform(0.0, 2.0);
  return pts;
}

QueryRecord base_query() {
  QueryRecord q;
  q.id = "q";
  q.concept_embeddings = std::vector<RealVector>(4, RealVector{0.1, 0.2});
  q.stakeholder_count = 0;
  q.candidate_probs = {1.0, 0.0, 0.0};
  q.correlation_input = DiscreteJoint::diagonal_uniform(4);
  return q;
}

}  // namespace

TEST(CorrelationStrength, DiagonalUniformIsOne) {
  EXPECT_NEAR(correlation_strength_exact(DiscreteJoint::diagonal_uniform(4)), 1.0, 1e-12);
}

TEST(CorrelationStrength, ProductIsZero) {
  const std::vector<double> px{0.3, 0.7}, py{0.2, 0.5, 0.3};
  EXPECT_NEAR(correlation_strength_exact(DiscreteJoint::product(px, py)), 0.0, 1e-12);
}

TEST(CorrelationStrength, TwoByTwoMatchesSummation) {
  const std::vector<double> p{0.4, 0.1, 0.1, 0.4};
  const double expected = oracle::mi_by_summation(p, 2, 2) / oracle::entropy_by_summation({0.5, 0.5});
  EXPECT_NEAR(expected, 0.2781, 1e-4);
  EXPECT_NEAR(correlation_strength_exact(DiscreteJoint(2, 2, p)), expected, 1e-12);
}

TEST(CorrelationStrength, DegenerateTargetThrows) {
  EXPECT_THROW(correlation_strength_exact(DiscreteJoint(2, 1, {0.5, 0.5})), DegenerateTarget);
}

TEST(CorrelationStrength, BoundedOnRandomJoints) {
  CounterRng rng(3, {1});
  for (int k = 0; k < 500; ++k) {
    const auto j = random_joint(1 + rng.below(5), 2 + rng.below(5), rng);
    const auto py = j.marginal_y();
    if (std::count_if(py.begin(), py.end(), [](double v) { return v > 0; }) < 2) continue;
    const double c = correlation_strength_exact(j);
    EXPECT_GE(c, 0.0);
    EXPECT_LE(c, 1.0);
  }
}

TEST(CorrelationModel, ZeroWeightSigmoidIsHalf) {
  CorrelationModel m{numeric::MlpParams::zeros({3, 4, 1}, numeric::Activation::tanh, numeric::Activation::sigmoid)};
  EXPECT_DOUBLE_EQ(correlation_strength_predict(m, {0.3, -2.0, 7.0}), 0.5);
  EXPECT_DOUBLE_EQ(correlation_strength_predict(m, {0.0, 0.0, 0.0}), 0.5);
}

TEST(CorrelationModel, ClampsOutOfRange) {
  auto net = numeric::MlpParams::zeros({2, 1}, numeric::Activation::tanh, numeric::Activation::identity);
  net.biases[0][0] = -0.2;
  EXPECT_DOUBLE_EQ(correlation_strength_predict({net}, {1.0, 1.0}), 0.0);
  net.biases[0][0] = 1.3;
  EXPECT_DOUBLE_EQ(correlation_strength_predict({net}, {1.0, 1.0}), 1.0);
}

TEST(CorrelationModel, DimensionMismatchThrows) {
  CorrelationModel m{numeric::MlpParams::zeros({3, 1})};
  EXPECT_THROW(correlation_strength_predict(m, {1.0}), InvalidInput);
}

TEST(CorrelationModel, LearnsExactLabels) {
  // Embedding = the 2x2 joint's cells, centred; label from the exact estimator.
  CounterRng rng(17, {2});
  std::vector<RealVector> emb;
  std::vector<double> labels;
  for (int k = 0; k < 200; ++k) {
    const auto j = random_joint(2, 2, rng);
    const auto py = j.marginal_y();
    if (py[0] < 0.05 || py[1] < 0.05) continue;
    RealVector e = j.probabilities();
    for (auto& v : e) v = 4.0 * v - 1.0;
    emb.push_back(std::move(e));
    labels.push_back(correlation_strength_exact(j));
  }
  numeric::TrainConfig cfg;
  cfg.learning_rate = 2.0;
  cfg.epochs = 2000;
  cfg.batch_size = 16;
  cfg.seed = 5;
  cfg.init_scale = 0.5;
  const auto model = fit_correlation_model(emb, labels, 16, cfg);
  for (std::size_t i = 0; i < emb.size(); ++i) EXPECT_NEAR(correlation_strength_predict(model, emb[i]), labels[i], 0.1);
  EXPECT_EQ(correlation_strength_predict(model, emb.front()), correlation_strength_predict(model, emb.front()));
}

TEST(Clustering, IdenticalVectorsFormOneCluster) {
  const std::vector<RealVector> pts(4, RealVector{0.5, -1.0});
  for (double d : {1e-9, 0.5, 10.0}) EXPECT_EQ(cluster_concepts(pts, 2, d).cluster_count, 1u);
}

TEST(Clustering, SeparatedPairIsTwoClusters) {
  const auto a = cluster_concepts({{0.0}, {10.0}}, 2, 1.0);
  EXPECT_EQ(a.cluster_count, 2u);
  EXPECT_EQ(a.labels, (std::vector<std::size_t>{0, 1}));
}

TEST(Clustering, TwoTriadsMatchComponents) {
  const std::vector<RealVector> pts{{0, 0}, {20, 0}, {0.1, 0}, {20.1, 0.1}, {0, 0.1}, {20, 0.2}};
  const auto a = cluster_concepts(pts, 2, 0.5);
  const auto [labels, count] = oracle::components(pts, 0.5, 2);
  EXPECT_EQ(a.cluster_count, 2u);
  EXPECT_EQ(a.cluster_count, count);
  EXPECT_EQ(a.labels, labels);
  EXPECT_EQ(a.labels, (std::vector<std::size_t>{0, 1, 0, 1, 0, 1}));
}

TEST(Clustering, MatchesComponentsOnRandomSmallInstances) {
  CounterRng rng(29, {3});
  for (int k = 0; k < 400; ++k) {
    const std::size_t n = 1 + rng.below(12);
    const auto pts = random_points(n, 1 + rng.below(3), rng);
    const double d = rng.uniform(0.05, 1.2);
    const std::size_t min_size = 1 + rng.below(4);
    const auto a = cluster_concepts(pts, min_size, d);
    const auto [labels, count] = oracle::components(pts, d, min_size);
    ASSERT_EQ(a.labels, labels) << "instance " << k;
    ASSERT_EQ(a.cluster_count, count);
    EXPECT_DOUBLE_EQ(domain_crossing(a, n), static_cast<double>(count) / static_cast<double>(n));
  }
}

TEST(Clustering, NoiseBecomesSingletons) {
  // Pair within reach plus an isolated point; min size 3 dissolves the pair.
  const std::vector<RealVector> pts{{0.0}, {0.2}, {5.0}};
  EXPECT_EQ(cluster_concepts(pts, 2, 0.5).cluster_count, 2u);
  EXPECT_EQ(cluster_concepts(pts, 3, 0.5).cluster_count, 3u);
}

TEST(Clustering, ScaleInvariant) {
  CounterRng rng(31, {4});
  for (int k = 0; k < 100; ++k) {
    const auto pts = random_points(2 + rng.below(10), 2, rng);
    const double d = rng.uniform(0.1, 1.0);
    // Powers of two scale exactly, so distances compare identically.
    for (double s : {0.25, 4.0, 1024.0}) {
      auto scaled = pts;
      for (auto& p : scaled)
        for (auto& v : p) v *= s;
      EXPECT_EQ(cluster_concepts(scaled, 2, d * s), cluster_concepts(pts, 2, d));
    }
  }
}

TEST(Clustering, InvalidInputs) {
  EXPECT_THROW(cluster_concepts({}, 2, 0.5), InvalidInput);
  EXPECT_THROW(cluster_concepts({{1.0}, {1.0, 2.0}}, 2, 0.5), InvalidInput);
  EXPECT_THROW(cluster_concepts({{1.0}}, 0, 0.5), InvalidInput);
  EXPECT_THROW(cluster_concepts({{1.0}}, 2, 0.0), InvalidInput);
  EXPECT_THROW(cluster_concepts({{std::nan("")}}, 2, 0.5), InvalidInput);
}

TEST(DomainCrossing, Arithmetic) {
  EXPECT_DOUBLE_EQ(domain_crossing({{0, 0, 0, 0}, 1}, 4), 0.25);
  EXPECT_DOUBLE_EQ(domain_crossing({{0, 1, 2, 3}, 4}, 4), 1.0);
  EXPECT_DOUBLE_EQ(domain_crossing({{0, 0, 0, 1, 1, 1}, 2}, 6), 1.0 / 3.0);
  EXPECT_THROW(domain_crossing({{0, 0}, 1}, 3), InvalidInput);
}

TEST(StakeholderMultiplicity, Values) {
  EXPECT_EQ(stakeholder_multiplicity(0), 0.0);
  EXPECT_NEAR(stakeholder_multiplicity(1), std::numbers::ln2, 1e-9);
  EXPECT_NEAR(stakeholder_multiplicity(1), 0.693147, 1e-6);
  EXPECT_NEAR(stakeholder_multiplicity(7), 2.079442, 1e-6);
  for (std::uint64_t c = 0; c < 1000; ++c) EXPECT_LT(stakeholder_multiplicity(c), stakeholder_multiplicity(c + 1));
}

TEST(UncertaintyLevel, Values) {
  EXPECT_EQ(uncertainty_level({1.0, 0.0, 0.0}), 0.0);
  EXPECT_DOUBLE_EQ(uncertainty_level({0.25, 0.25, 0.25, 0.25}), 0.75);
  EXPECT_DOUBLE_EQ(uncertainty_level({0.6, 0.3, 0.1}), 0.4);
  EXPECT_THROW(uncertainty_level({0.5, 0.2}), InvalidInput);
  EXPECT_THROW(uncertainty_level({}), InvalidInput);
}

TEST(UncertaintyLevel, PermutationInvariantAndZeroOnlyWhenCertain) {
  CounterRng rng(37, {5});
  for (int k = 0; k < 200; ++k) {
    std::vector<double> p(2 + rng.below(6));
    double total = 0;
    for (auto& v : p) total += v = rng.uniform(0.01, 1.0);
    for (auto& v : p) v /= total;
    const double u = uncertainty_level(p);
    EXPECT_GT(u, 0.0);
    std::reverse(p.begin(), p.end());
    EXPECT_EQ(uncertainty_level(p), u);
  }
}

TEST(ExtractFeatures, TrivialComposition) {
  const auto f = extract_features(base_query(), nullptr);
  EXPECT_NEAR(f.c_s, 1.0, 1e-12);
  EXPECT_DOUBLE_EQ(f.d_c, 0.25);
  EXPECT_EQ(f.s_m, 0.0);
  EXPECT_EQ(f.u_l, 0.0);
}

TEST(ExtractFeatures, DerivedComposition) {
  auto q = base_query();
  const std::vector<double> half{0.5, 0.5};
  q.correlation_input = DiscreteJoint::product(half, half);
  q.concept_embeddings = {{0.0, 0.0}, {3.0, 0.0}, {0.0, 3.0}, {3.0, 3.0}};
  q.stakeholder_count = 7;
  q.candidate_probs = {0.25, 0.25, 0.25, 0.25};
  const auto f = extract_features(q, nullptr);
  EXPECT_NEAR(f.c_s, 0.0, 1e-12);
  EXPECT_DOUBLE_EQ(f.d_c, 1.0);
  EXPECT_NEAR(f.s_m, 2.079442, 1e-6);
  EXPECT_DOUBLE_EQ(f.u_l, 0.75);
  EXPECT_EQ(extract_features(q, nullptr), f);
}

TEST(ExtractFeatures, ErrorsNameTheDimension) {
  auto q = base_query();
  q.correlation_input = DiscreteJoint(2, 1, {0.5, 0.5});
  try {
    extract_features(q, nullptr);
    FAIL();
  } catch (const FeatureError& e) {
    EXPECT_EQ(e.dimension(), "c_s");
  }
  q = base_query();
  q.correlation_input = RealVector{0.1, 0.2};
  try {
    extract_features(q, nullptr);
    FAIL();
  } catch (const FeatureError& e) {
    EXPECT_EQ(e.dimension(), "c_s");
  }
  q = base_query();
  q.concept_embeddings.clear();
  try {
    extract_features(q, nullptr);
    FAIL();
  } catch (const FeatureError& e) {
    EXPECT_EQ(e.dimension(), "d_c");
  }
  q = base_query();
  q.candidate_probs = {0.3};
  try {
    extract_features(q, nullptr);
    FAIL();
  } catch (const FeatureError& e) {
    EXPECT_EQ(e.dimension(), "u_l");
  }
}

TEST(ExtractFeatures, EmbeddingModeUsesModel) {
  auto q = base_query();
  q.correlation_input = RealVector{1.0, 2.0};
  const CorrelationModel m{numeric::MlpParams::zeros({2, 3, 1}, numeric::Activation::tanh, numeric::Activation::sigmoid)};
  EXPECT_DOUBLE_EQ(extract_features(q, &m).c_s, 0.5);
  EXPECT_DOUBLE_EQ(extract_features(q, std::optional<CorrelationModel>(m)).c_s, 0.5);
}
