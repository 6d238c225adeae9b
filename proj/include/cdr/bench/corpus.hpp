#pragma once

// Synthetic query corpus. Each category draws a latent complexity z from its
// own range; the four record fields are monotone in a noisy copy of z, so a
// router can learn the oracle boundary but not perfectly once noise is on.

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "cdr/engines.hpp"
#include "cdr/errors.hpp"
#include "cdr/features.hpp"
#include "cdr/numeric/information.hpp"
#include "cdr/random.hpp"

namespace cdr::bench {

enum class Category : std::size_t {
  professional_judgment,
  cross_domain,
  correlation_prediction,
  multi_stakeholder,
  factual,
};

inline constexpr std::size_t kCategoryCount = 5;
inline constexpr std::array<const char*, kCategoryCount> kCategoryNames = {
    "professional_judgment", "cross_domain", "correlation_prediction", "multi_stakeholder", "factual"};

// Latent complexity range per category, indexed like kCategoryNames.
inline constexpr std::array<std::pair<double, double>, kCategoryCount> kComplexityRange = {{
    {0.5, 1.0},  // professional_judgment
    {0.3, 0.8},  // cross_domain
    {0.2, 0.7},  // correlation_prediction
    {0.2, 0.7},  // multi_stakeholder
    {0.0, 0.3},  // factual
}};

inline Category category_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kCategoryCount; ++i)
    if (s == kCategoryNames[i]) return static_cast<Category>(i);
  throw InvalidInput("unknown category '" + s + "'");
}

struct CorpusSpec {
  std::size_t n_queries = 2000;
  std::uint64_t seed = 42;
  std::array<double, kCategoryCount> category_mix{0.2, 0.2, 0.2, 0.2, 0.2};
  double noise_scale = 0.1;
  std::size_t embedding_dim = 8;
  std::uint64_t n_options = 4;

  void validate() const {
    if (n_queries == 0) throw InvalidInput("corpus.n_queries must be positive");
    double s = 0.0;
    for (double p : category_mix) {
      if (!(p >= 0.0) || !std::isfinite(p)) throw InvalidInput("corpus.category_mix entries must be >= 0");
      s += p;
    }
    if (std::fabs(s - 1.0) > 1e-9)
      throw InvalidInput("corpus.category_mix must sum to 1 (got " + std::to_string(s) + ")");
    if (!(noise_scale >= 0.0) || !std::isfinite(noise_scale)) throw InvalidInput("corpus.noise_scale must be >= 0");
    if (embedding_dim < 8) throw InvalidInput("corpus.embedding_dim must be at least 8");
    if (n_options < 2) throw InvalidInput("corpus.n_options must be at least 2");
  }
};

// Largest-remainder allocation of n over the mix; ties go to the earlier category.
inline std::array<std::size_t, kCategoryCount> allocate_categories(std::size_t n,
                                                                   const std::array<double, kCategoryCount>& mix) {
  std::array<std::size_t, kCategoryCount> counts{};
  std::array<double, kCategoryCount> rem{};
  std::size_t used = 0;
  for (std::size_t c = 0; c < kCategoryCount; ++c) {
    const double exact = mix[c] * static_cast<double>(n);
    counts[c] = static_cast<std::size_t>(std::floor(exact));
    rem[c] = exact - static_cast<double>(counts[c]);
    used += counts[c];
  }
  while (used < n) {
    std::size_t best = 0;
    for (std::size_t c = 1; c < kCategoryCount; ++c)
      if (rem[c] > rem[best]) best = c;
    ++counts[best];
    rem[best] = -1.0;
    ++used;
  }
  return counts;
}

namespace detail {

// Mixture of "X determines Y" and independence over k states; weight m on independence.
inline numeric::DiscreteJoint mixed_joint(double m, std::size_t k) {
  const double kd = static_cast<double>(k);
  std::vector<double> p(k * k, m / (kd * kd));
  for (std::size_t i = 0; i < k; ++i) p[i * k + i] += (1.0 - m) / kd;
  // Renormalise so validation sees an exact distribution.
  double s = 0.0;
  for (double v : p) s += v;
  for (double& v : p) v /= s;
  return numeric::DiscreteJoint(k, k, std::move(p));
}

inline double noisy(double z, double scale, CounterRng& rng) { return std::clamp(z + scale * rng.normal(), 0.0, 1.0); }

}  // namespace detail

inline std::string query_id(std::size_t i) {
  std::string digits = std::to_string(i);
  return "q" + std::string(digits.size() < 6 ? 6 - digits.size() : 0, '0') + digits;
}

// Builds one query of the given category at position i.
inline engines::SimulatedQuery make_query(const CorpusSpec& spec, std::size_t i, Category cat) {
  CounterRng rng(spec.seed, {0xc0, i});
  const auto [lo, hi] = kComplexityRange[static_cast<std::size_t>(cat)];
  const double z = rng.uniform(lo, hi);

  engines::SimulatedQuery q;
  q.category = kCategoryNames[static_cast<std::size_t>(cat)];
  q.latent_complexity = z;
  q.n_options = spec.n_options;
  auto& r = q.record;
  r.id = query_id(i);
  r.text = "synthetic " + q.category + " query " + std::to_string(i);

  // Weak correlation between information and conclusion at high complexity.
  r.correlation_input = detail::mixed_joint(detail::noisy(z, spec.noise_scale, rng), 4);

  // Concepts spread over more domains as complexity rises.
  const double zd = detail::noisy(z, spec.noise_scale, rng);
  const std::size_t n_concepts = 3 + static_cast<std::size_t>(rng.below(3)) + static_cast<std::size_t>(std::lround(2.0 * z));
  const std::size_t n_domains = 1 + static_cast<std::size_t>(std::lround(zd * static_cast<double>(n_concepts - 1)));
  std::vector<std::size_t> axes(spec.embedding_dim);
  for (std::size_t k = 0; k < axes.size(); ++k) axes[k] = k;
  for (std::size_t k = axes.size(); k > 1; --k) std::swap(axes[k - 1], axes[rng.below(k)]);
  for (std::size_t c = 0; c < n_concepts; ++c) {
    const std::size_t domain = c < n_domains ? c : static_cast<std::size_t>(rng.below(n_domains));
    numeric::RealVector e(spec.embedding_dim);
    for (auto& v : e) v = 0.05 * rng.normal();
    e[axes[domain]] += 1.0;
    double norm = 0.0;
    for (double v : e) norm += v * v;
    norm = std::sqrt(norm);
    for (auto& v : e) v /= norm;
    r.concept_embeddings.push_back(std::move(e));
  }

  r.stakeholder_count = static_cast<std::uint64_t>(std::lround(8.0 * detail::noisy(z, spec.noise_scale, rng)));

  // Top-option confidence falls with complexity; the rest share the remainder.
  const double others = static_cast<double>(spec.n_options - 1);
  const double u = (others / static_cast<double>(spec.n_options)) * detail::noisy(z, spec.noise_scale, rng);
  r.candidate_probs.assign(spec.n_options, u / others);
  r.candidate_probs[0] = 1.0 - u;
  return q;
}

// Deterministic per seed. Categories are allocated by largest remainder and
// interleaved by a seeded shuffle; oracle labels use the given profiles.
inline std::vector<engines::SimulatedQuery> generate_corpus(const CorpusSpec& spec, const engines::EngineProfile& fast,
                                                            const engines::EngineProfile& slow,
                                                            const engines::UtilityConfig& util) {
  spec.validate();
  const auto counts = allocate_categories(spec.n_queries, spec.category_mix);
  std::vector<Category> cats;
  cats.reserve(spec.n_queries);
  for (std::size_t c = 0; c < kCategoryCount; ++c) cats.insert(cats.end(), counts[c], static_cast<Category>(c));
  CounterRng order_rng(spec.seed, {0xca7});
  for (std::size_t k = cats.size(); k > 1; --k) std::swap(cats[k - 1], cats[order_rng.below(k)]);

  std::vector<engines::SimulatedQuery> corpus;
  corpus.reserve(spec.n_queries);
  for (std::size_t i = 0; i < spec.n_queries; ++i) {
    auto q = make_query(spec, i, cats[i]);
    q.oracle_label = engines::oracle_best_strategy(q, fast, slow, util);
    corpus.push_back(std::move(q));
  }
  return corpus;
}

}  // namespace cdr::bench
