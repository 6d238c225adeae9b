#pragma once

// Entropy and mutual information, all in nats.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "cdr/errors.hpp"
#include "cdr/numeric/linalg.hpp"
#include "cdr/numeric/mlp.hpp"
#include "cdr/random.hpp"

namespace cdr::numeric {

inline constexpr double kProbabilityTolerance = 1e-9;

inline void validate_distribution(std::span<const double> p, const char* what = "distribution") {
  if (p.empty()) throw InvalidInput(std::string(what) + ": empty");
  CompensatedSum s;
  for (double v : p) {
    if (!std::isfinite(v) || v < 0.0) throw InvalidInput(std::string(what) + ": entries must be finite and >= 0");
    s.add(v);
  }
  if (std::fabs(s.value() - 1.0) > kProbabilityTolerance)
    throw InvalidInput(std::string(what) + ": entries sum to " + std::to_string(s.value()) + ", expected 1");
}

// H = -sum p ln p with 0 ln 0 = 0.
inline double entropy(std::span<const double> p) {
  validate_distribution(p);
  CompensatedSum h;
  for (double v : p)
    if (v > 0.0) h.add(-v * std::log(v));
  return std::max(0.0, h.value());
}

// Joint distribution over (x_state, y_state), row-major with x as row.
class DiscreteJoint {
 public:
  DiscreteJoint(std::size_t x_states, std::size_t y_states, std::vector<double> probabilities)
      : rows_(x_states), cols_(y_states), p_(std::move(probabilities)) {
    if (rows_ == 0 || cols_ == 0) throw InvalidInput("joint: empty state space");
    if (p_.size() != rows_ * cols_) throw InvalidInput("joint: probability grid has wrong size");
    validate_distribution(p_, "joint");
  }

  static DiscreteJoint product(std::span<const double> px, std::span<const double> py) {
    validate_distribution(px, "marginal x");
    validate_distribution(py, "marginal y");
    std::vector<double> p;
    p.reserve(px.size() * py.size());
    for (double a : px)
      for (double b : py) p.push_back(a * b);
    return DiscreteJoint(px.size(), py.size(), std::move(p));
  }

  // X = Y, uniform over n states.
  static DiscreteJoint diagonal_uniform(std::size_t n) {
    std::vector<double> p(n * n, 0.0);
    for (std::size_t i = 0; i < n; ++i) p[i * n + i] = 1.0 / static_cast<double>(n);
    return DiscreteJoint(n, n, std::move(p));
  }

  std::size_t x_states() const noexcept { return rows_; }
  std::size_t y_states() const noexcept { return cols_; }
  double operator()(std::size_t x, std::size_t y) const { return p_[x * cols_ + y]; }
  const std::vector<double>& probabilities() const noexcept { return p_; }

  std::vector<double> marginal_x() const {
    std::vector<double> m(rows_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) m[i] += (*this)(i, j);
    return m;
  }
  std::vector<double> marginal_y() const {
    std::vector<double> m(cols_, 0.0);
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) m[j] += (*this)(i, j);
    return m;
  }

  DiscreteJoint transposed() const {
    std::vector<double> t(p_.size());
    for (std::size_t i = 0; i < rows_; ++i)
      for (std::size_t j = 0; j < cols_; ++j) t[j * rows_ + i] = (*this)(i, j);
    return DiscreteJoint(cols_, rows_, std::move(t));
  }

  bool operator==(const DiscreteJoint&) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> p_;
};

// I(X;Y) = sum p(x,y) ln[p(x,y) / (p(x) p(y))], zero cells skipped.
inline double mi_exact(const DiscreteJoint& joint) {
  const auto px = joint.marginal_x();
  const auto py = joint.marginal_y();
  CompensatedSum s;
  for (std::size_t i = 0; i < joint.x_states(); ++i)
    for (std::size_t j = 0; j < joint.y_states(); ++j) {
      const double p = joint(i, j);
      if (p > 0.0) s.add(p * std::log(p / (px[i] * py[j])));
    }
  const double upper = std::min(entropy(px), entropy(py));
  return std::clamp(s.value(), 0.0, upper);
}

namespace detail {

inline std::vector<std::size_t> equal_width_bins(std::span<const double> v, std::size_t bins) {
  const auto [lo_it, hi_it] = std::minmax_element(v.begin(), v.end());
  const double lo = *lo_it;
  const double width = (*hi_it - lo) / static_cast<double>(bins);
  std::vector<std::size_t> out(v.size(), 0);
  if (!(width > 0.0)) return out;
  for (std::size_t i = 0; i < v.size(); ++i) {
    const auto b = static_cast<std::size_t>((v[i] - lo) / width);
    out[i] = std::min(b, bins - 1);
  }
  return out;
}

}  // namespace detail

// Plug-in MI of the equal-width binned empirical joint (1-D x and y).
inline double mi_histogram(const SampleSet& samples, std::size_t bins_per_dim) {
  if (samples.size() == 0) throw InvalidInput("mi_histogram: empty samples");
  samples.validate();
  if (samples.x_dim() != 1 || samples.y_dim() != 1) throw InvalidInput("mi_histogram: samples must be 1-D per side");
  if (bins_per_dim < 2) throw InvalidInput("mi_histogram: need at least two bins");

  std::vector<double> xs, ys;
  xs.reserve(samples.size());
  ys.reserve(samples.size());
  for (const auto& [x, y] : samples.pairs) {
    xs.push_back(x[0]);
    ys.push_back(y[0]);
  }
  const auto bx = detail::equal_width_bins(xs, bins_per_dim);
  const auto by = detail::equal_width_bins(ys, bins_per_dim);
  std::vector<std::uint64_t> counts(bins_per_dim * bins_per_dim, 0);
  for (std::size_t i = 0; i < bx.size(); ++i) ++counts[bx[i] * bins_per_dim + by[i]];

  const double n = static_cast<double>(samples.size());
  std::vector<double> p(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) p[k] = static_cast<double>(counts[k]) / n;
  // Renormalise away summation error before validation.
  CompensatedSum total;
  for (double v : p) total.add(v);
  for (double& v : p) v /= total.value();
  return mi_exact(DiscreteJoint(bins_per_dim, bins_per_dim, std::move(p)));
}

// Donsker-Varadhan estimate E_P[T] - ln E_{PxP}[exp T] of a trained critic,
// negatives taken from a seeded derangement of y over the full set.
inline double dv_estimate(const MlpParams& critic, const SampleSet& samples, std::uint64_t seed) {
  return -dataset_objective(critic, samples, Loss::dv_mi_objective, combine_key(seed, 0xd5));
}

inline std::vector<std::size_t> default_critic_sizes(std::size_t x_dim, std::size_t y_dim) {
  return {x_dim + y_dim, 16, 16, 1};
}

// Critic training defaults; stable on 10k-sample 2-D problems at these rates.
inline TrainConfig default_critic_config(std::uint64_t seed = 0) { return TrainConfig{0.02, 60, 128, seed, 0.5}; }

// Trains a tanh critic (identity output) on the DV objective, then reports its
// DV estimate. Sizes default to (dx+dy) -> 16 -> 16 -> 1.
inline double mi_critic(const SampleSet& samples, const TrainConfig& cfg, std::vector<std::size_t> critic_sizes = {}) {
  samples.validate();
  if (samples.size() < 100) throw InvalidInput("mi_critic: need at least 100 samples");
  if (critic_sizes.empty()) critic_sizes = default_critic_sizes(samples.x_dim(), samples.y_dim());
  if (critic_sizes.front() != samples.x_dim() + samples.y_dim())
    throw InvalidInput("mi_critic: critic input must equal dim(x) + dim(y)");
  if (critic_sizes.back() != 1) throw InvalidInput("mi_critic: critic must have a single output");
  auto critic = MlpParams::random(std::move(critic_sizes), Activation::tanh, Activation::identity, cfg.seed,
                                  cfg.init_scale);
  critic = mlp_train(std::move(critic), samples, Loss::dv_mi_objective, cfg);
  return dv_estimate(critic, samples, cfg.seed);
}

}  // namespace cdr::numeric
