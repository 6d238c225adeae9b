#pragma once

// Small fully-connected network: forward pass, backprop for three objectives,
// plain mini-batch SGD and a finite-difference gradient checker.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include "cdr/errors.hpp"
#include "cdr/numeric/linalg.hpp"
#include "cdr/random.hpp"

namespace cdr::numeric {

enum class Activation { identity, tanh, relu, sigmoid };

enum class Loss {
  squared_error,         // 0.5 * sum_k (out_k - target_k)^2, averaged over samples
  binary_cross_entropy,  // requires sigmoid output, computed from the logit
  dv_mi_objective,       // -(E_P[T] - ln E_{PxP}[exp T]); critic input is concat(x, y)
};

inline const char* to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::tanh: return "tanh";
    case Activation::relu: return "relu";
    case Activation::sigmoid: return "sigmoid";
  }
  return "?";
}

inline Activation activation_from_string(const std::string& s) {
  if (s == "identity") return Activation::identity;
  if (s == "tanh") return Activation::tanh;
  if (s == "relu") return Activation::relu;
  if (s == "sigmoid") return Activation::sigmoid;
  throw InvalidInput("unknown activation '" + s + "'");
}

inline const char* to_string(Loss l) {
  switch (l) {
    case Loss::squared_error: return "squared_error";
    case Loss::binary_cross_entropy: return "binary_cross_entropy";
    case Loss::dv_mi_objective: return "dv_mi_objective";
  }
  return "?";
}

inline double sigmoid(double z) noexcept {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double softplus(double z) noexcept { return std::max(z, 0.0) + std::log1p(std::exp(-std::fabs(z))); }

inline double activate(Activation a, double z) noexcept {
  switch (a) {
    case Activation::identity: return z;
    case Activation::tanh: return std::tanh(z);
    case Activation::relu: return z > 0 ? z : 0.0;
    case Activation::sigmoid: return sigmoid(z);
  }
  return z;
}

// Derivative expressed through the pre-activation and its image.
inline double activate_derivative(Activation a, double pre, double post) noexcept {
  switch (a) {
    case Activation::identity: return 1.0;
    case Activation::tanh: return 1.0 - post * post;
    case Activation::relu: return pre > 0 ? 1.0 : 0.0;
    case Activation::sigmoid: return post * (1.0 - post);
  }
  return 1.0;
}

struct MlpParams {
  std::vector<std::size_t> layer_sizes;  // input .. output
  std::vector<Matrix> weights;           // weights[l] is layer_sizes[l+1] x layer_sizes[l]
  std::vector<RealVector> biases;
  Activation hidden = Activation::tanh;
  Activation output = Activation::identity;

  static MlpParams zeros(std::vector<std::size_t> sizes, Activation hidden = Activation::tanh,
                         Activation output = Activation::identity) {
    if (sizes.size() < 2) throw InvalidInput("mlp: need at least input and output layer");
    for (auto s : sizes)
      if (s == 0) throw InvalidInput("mlp: layer sizes must be positive");
    if (hidden != Activation::tanh && hidden != Activation::relu)
      throw InvalidInput("mlp: hidden activation must be tanh or relu");
    if (output != Activation::identity && output != Activation::sigmoid)
      throw InvalidInput("mlp: output activation must be identity or sigmoid");
    MlpParams p;
    p.layer_sizes = std::move(sizes);
    p.hidden = hidden;
    p.output = output;
    for (std::size_t l = 0; l + 1 < p.layer_sizes.size(); ++l) {
      p.weights.emplace_back(p.layer_sizes[l + 1], p.layer_sizes[l]);
      p.biases.emplace_back(p.layer_sizes[l + 1], 0.0);
    }
    return p;
  }

  // Uniform in [-scale, scale]; parameter k draws counter k of the seed's stream.
  static MlpParams random(std::vector<std::size_t> sizes, Activation hidden, Activation output,
                          std::uint64_t seed, double scale) {
    if (!(scale > 0.0) || !std::isfinite(scale)) throw InvalidInput("mlp: init_scale must be positive");
    MlpParams p = zeros(std::move(sizes), hidden, output);
    const std::uint64_t key = combine_key(seed, 0x1417);
    for (std::size_t k = 0; k < p.parameter_count(); ++k)
      p.parameter(k) = scale * (2.0 * CounterRng::uniform_at(key, k) - 1.0);
    return p;
  }

  std::size_t layer_count() const noexcept { return weights.size(); }
  std::size_t input_size() const noexcept { return layer_sizes.empty() ? 0 : layer_sizes.front(); }
  std::size_t output_size() const noexcept { return layer_sizes.empty() ? 0 : layer_sizes.back(); }

  std::size_t parameter_count() const noexcept {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights.size(); ++l) n += weights[l].data.size() + biases[l].size();
    return n;
  }

  // Flat view: layer by layer, weights (row-major) then biases.
  double& parameter(std::size_t k) {
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (k < weights[l].data.size()) return weights[l].data[k];
      k -= weights[l].data.size();
      if (k < biases[l].size()) return biases[l][k];
      k -= biases[l].size();
    }
    throw InvalidInput("mlp: parameter index out of range");
  }
  double parameter(std::size_t k) const { return const_cast<MlpParams&>(*this).parameter(k); }

  void validate() const {
    if (layer_sizes.size() < 2) throw InvalidInput("mlp: need at least input and output layer");
    if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size())
      throw InvalidInput("mlp: layer count mismatch");
    for (std::size_t l = 0; l < weights.size(); ++l) {
      if (layer_sizes[l] == 0 || layer_sizes[l + 1] == 0) throw InvalidInput("mlp: zero-width layer");
      const auto& w = weights[l];
      if (w.rows != layer_sizes[l + 1] || w.cols != layer_sizes[l] || w.data.size() != w.rows * w.cols)
        throw InvalidInput("mlp: weight shape mismatch at layer " + std::to_string(l));
      if (biases[l].size() != layer_sizes[l + 1])
        throw InvalidInput("mlp: bias shape mismatch at layer " + std::to_string(l));
      require_finite(w.data, "mlp weights");
      require_finite(biases[l], "mlp biases");
    }
    if (hidden != Activation::tanh && hidden != Activation::relu)
      throw InvalidInput("mlp: hidden activation must be tanh or relu");
    if (output != Activation::identity && output != Activation::sigmoid)
      throw InvalidInput("mlp: output activation must be identity or sigmoid");
  }

  bool operator==(const MlpParams&) const = default;
};

struct TrainConfig {
  double learning_rate = 0.05;
  std::size_t epochs = 100;
  std::size_t batch_size = 32;
  std::uint64_t seed = 0;
  double init_scale = 0.5;

  void validate() const {
    if (!(learning_rate > 0.0) || !std::isfinite(learning_rate))
      throw InvalidInput("train config: learning_rate must be > 0");
    if (epochs < 1) throw InvalidInput("train config: epochs must be >= 1");
    if (batch_size < 1) throw InvalidInput("train config: batch_size must be >= 1");
    if (!(init_scale > 0.0) || !std::isfinite(init_scale))
      throw InvalidInput("train config: init_scale must be > 0");
  }
};

struct SampleSet {
  std::vector<std::pair<RealVector, RealVector>> pairs;

  std::size_t size() const noexcept { return pairs.size(); }
  std::size_t x_dim() const noexcept { return pairs.empty() ? 0 : pairs.front().first.size(); }
  std::size_t y_dim() const noexcept { return pairs.empty() ? 0 : pairs.front().second.size(); }

  void validate() const {
    if (pairs.empty()) throw InvalidInput("sample set is empty");
    for (const auto& [x, y] : pairs) {
      if (x.size() != x_dim() || y.size() != y_dim()) throw InvalidInput("sample set: ragged dimensions");
      require_finite(x, "sample x");
      require_finite(y, "sample y");
    }
  }
};

// Activations of every layer; post[0] is the input.
struct ForwardTrace {
  std::vector<RealVector> pre;
  std::vector<RealVector> post;
};

inline ForwardTrace forward_trace(const MlpParams& params, std::span<const double> input) {
  if (input.size() != params.input_size())
    throw InvalidInput("mlp_forward: input length " + std::to_string(input.size()) + " != " +
                       std::to_string(params.input_size()));
  ForwardTrace t;
  t.post.emplace_back(input.begin(), input.end());
  const std::size_t n_layers = params.layer_count();
  for (std::size_t l = 0; l < n_layers; ++l) {
    RealVector z = affine(params.weights[l], t.post.back(), params.biases[l]);
    const Activation act = (l + 1 == n_layers) ? params.output : params.hidden;
    RealVector a(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) a[i] = activate(act, z[i]);
    t.pre.push_back(std::move(z));
    t.post.push_back(std::move(a));
  }
  return t;
}

inline RealVector mlp_forward(const MlpParams& params, std::span<const double> input) {
  auto t = forward_trace(params, input);
  return std::move(t.post.back());
}

namespace detail {

// delta is dLoss/d(pre-activation) of the output layer, already scaled.
inline void backprop(const MlpParams& params, const ForwardTrace& t, RealVector delta, MlpParams& grad) {
  for (std::size_t l = params.layer_count(); l-- > 0;) {
    const auto& in = t.post[l];
    auto& gw = grad.weights[l];
    for (std::size_t r = 0; r < gw.rows; ++r) {
      double* row = gw.data.data() + r * gw.cols;
      for (std::size_t c = 0; c < gw.cols; ++c) row[c] += delta[r] * in[c];
      grad.biases[l][r] += delta[r];
    }
    if (l == 0) break;
    const auto& w = params.weights[l];
    RealVector prev(w.cols, 0.0);
    for (std::size_t r = 0; r < w.rows; ++r) {
      const double* row = w.data.data() + r * w.cols;
      for (std::size_t c = 0; c < w.cols; ++c) prev[c] += row[c] * delta[r];
    }
    for (std::size_t c = 0; c < prev.size(); ++c)
      prev[c] *= activate_derivative(params.hidden, t.pre[l - 1][c], t.post[l][c]);
    delta = std::move(prev);
  }
}

// Critic output minus its bias term, from the penultimate activations.
inline double critic_without_bias(const MlpParams& params, const ForwardTrace& t) {
  const auto& w = params.weights.back();
  const auto& in = t.post[t.post.size() - 2];
  double s = 0.0;
  for (std::size_t c = 0; c < w.cols; ++c) s += w.data[c] * in[c];
  return s;
}

inline RealVector concat(std::span<const double> a, std::span<const double> b) {
  RealVector v;
  v.reserve(a.size() + b.size());
  v.insert(v.end(), a.begin(), a.end());
  v.insert(v.end(), b.begin(), b.end());
  return v;
}

inline void check_shapes(const MlpParams& params, const SampleSet& data, Loss loss) {
  data.validate();
  if (loss == Loss::dv_mi_objective) {
    if (params.output_size() != 1 || params.output != Activation::identity)
      throw InvalidInput("dv_mi_objective: critic must have one identity output");
    if (data.x_dim() + data.y_dim() != params.input_size())
      throw InvalidInput("dv_mi_objective: critic input must equal dim(x) + dim(y)");
    if (data.size() < 2) throw InvalidInput("dv_mi_objective: need at least two samples");
  } else {
    if (data.x_dim() != params.input_size()) throw InvalidInput("training input dimension mismatch");
    if (data.y_dim() != params.output_size()) throw InvalidInput("training target dimension mismatch");
    if (loss == Loss::binary_cross_entropy) {
      if (params.output != Activation::sigmoid)
        throw InvalidInput("binary_cross_entropy requires a sigmoid output");
      for (const auto& [x, y] : data.pairs)
        for (double t : y)
          if (t < 0.0 || t > 1.0) throw InvalidInput("binary_cross_entropy targets must lie in [0,1]");
    }
  }
}

}  // namespace detail

// Mean objective over `batch` (indices into data). For the DV objective,
// negatives[j] gives the batch position whose y is paired with x of position j.
// Accumulates the gradient into *grad when non-null.
inline double batch_objective(const MlpParams& params, const SampleSet& data, Loss loss,
                              std::span<const std::size_t> batch, std::span<const std::size_t> negatives,
                              MlpParams* grad) {
  const double inv_b = 1.0 / static_cast<double>(batch.size());
  if (loss != Loss::dv_mi_objective) {
    CompensatedSum total;
    for (std::size_t idx : batch) {
      const auto& [x, y] = data.pairs[idx];
      const auto t = forward_trace(params, x);
      const auto& z = t.pre.back();
      const auto& o = t.post.back();
      RealVector delta(o.size());
      double l = 0.0;
      for (std::size_t k = 0; k < o.size(); ++k) {
        if (loss == Loss::squared_error) {
          const double e = o[k] - y[k];
          l += 0.5 * e * e;
          delta[k] = e * activate_derivative(params.output, z[k], o[k]) * inv_b;
        } else {
          l += softplus(z[k]) - y[k] * z[k];
          delta[k] = (o[k] - y[k]) * inv_b;
        }
      }
      total.add(l);
      if (grad) detail::backprop(params, t, std::move(delta), *grad);
    }
    return total.value() * inv_b;
  }

  if (negatives.size() != batch.size()) throw InvalidInput("dv objective: negatives/batch size mismatch");
  const std::size_t b = batch.size();
  // The objective is invariant to the output bias; it is left out of T so the
  // invariance also holds in floating point, and its gradient stays exactly 0.
  const double saved_bias_grad = grad ? grad->biases.back()[0] : 0.0;
  std::vector<ForwardTrace> neg_traces;
  neg_traces.reserve(grad ? b : 0);
  RealVector neg_t(b);
  double max_t = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < b; ++j) {
    const auto& x = data.pairs[batch[j]].first;
    const auto& y = data.pairs[batch[negatives[j]]].second;
    auto t = forward_trace(params, detail::concat(x, y));
    neg_t[j] = detail::critic_without_bias(params, t);
    max_t = std::max(max_t, neg_t[j]);
    if (grad) neg_traces.push_back(std::move(t));
  }
  CompensatedSum exp_sum;
  for (double v : neg_t) exp_sum.add(std::exp(v - max_t));
  const double log_mean_exp = max_t + std::log(exp_sum.value() * inv_b);

  CompensatedSum pos_sum;
  for (std::size_t j = 0; j < b; ++j) {
    const auto& [x, y] = data.pairs[batch[j]];
    auto t = forward_trace(params, detail::concat(x, y));
    pos_sum.add(detail::critic_without_bias(params, t));
    if (grad) detail::backprop(params, t, RealVector{-inv_b}, *grad);
  }
  if (grad) {
    for (std::size_t j = 0; j < b; ++j) {
      const double w = std::exp(neg_t[j] - max_t) / exp_sum.value();
      detail::backprop(params, neg_traces[j], RealVector{w}, *grad);
    }
    grad->biases.back()[0] = saved_bias_grad;
  }
  return -(pos_sum.value() * inv_b - log_mean_exp);
}

// Objective over the whole set; DV negatives come from a seeded derangement.
inline double dataset_objective(const MlpParams& params, const SampleSet& data, Loss loss,
                                std::uint64_t negative_seed = 0) {
  detail::check_shapes(params, data, loss);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<std::size_t> neg;
  if (loss == Loss::dv_mi_objective) {
    CounterRng rng(negative_seed, {0xe7a1});
    neg = random_derangement(all.size(), rng);
  }
  return batch_objective(params, data, loss, all, neg, nullptr);
}

struct TrainReport {
  MlpParams params;
  double initial_loss = 0.0;
  std::vector<double> epoch_losses;  // full-data objective after each epoch
};

// Plain mini-batch SGD. Each epoch visits the data in a seeded permutation;
// DV negatives are a seeded derangement within each batch.
//
// With batch_size >= data size this is full-batch gradient descent, and the
// per-epoch loss is non-increasing whenever learning_rate < 2 / L, L being the
// Lipschitz constant of the loss gradient. For the small nets used here with
// init_scale <= 1 and inputs in [-1, 1], learning_rate <= 0.1 stays inside it.
inline TrainReport mlp_fit(MlpParams params, const SampleSet& data, Loss loss, const TrainConfig& cfg) {
  params.validate();
  cfg.validate();
  detail::check_shapes(params, data, loss);

  TrainReport report;
  const std::size_t n = data.size();
  const std::size_t bs = std::min(cfg.batch_size, n);
  report.initial_loss = dataset_objective(params, data, loss, cfg.seed);
  if (!std::isfinite(report.initial_loss)) throw TrainingDiverged(0);

  MlpParams grad = MlpParams::zeros(params.layer_sizes, params.hidden, params.output);
  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    CounterRng order_rng(cfg.seed, {0x0de7, epoch});
    const auto order = random_permutation(n, order_rng);
    std::size_t batch_no = 0;
    for (std::size_t start = 0; start < n; start += bs, ++batch_no) {
      const std::size_t end = std::min(n, start + bs);
      // Fold a short tail into the previous batch for the DV objective.
      if (loss == Loss::dv_mi_objective && end - start < 2) break;
      std::span<const std::size_t> batch(order.data() + start, end - start);
      std::vector<std::size_t> neg;
      if (loss == Loss::dv_mi_objective) {
        CounterRng neg_rng(cfg.seed, {0x9e6, epoch, batch_no});
        neg = random_derangement(batch.size(), neg_rng);
      }
      for (auto& w : grad.weights) std::fill(w.data.begin(), w.data.end(), 0.0);
      for (auto& b : grad.biases) std::fill(b.begin(), b.end(), 0.0);
      const double l = batch_objective(params, data, loss, batch, neg, &grad);
      if (!std::isfinite(l)) throw TrainingDiverged(epoch);
      for (std::size_t k = 0, m = params.parameter_count(); k < m; ++k)
        params.parameter(k) -= cfg.learning_rate * grad.parameter(k);
    }
    const double epoch_loss = dataset_objective(params, data, loss, cfg.seed);
    if (!std::isfinite(epoch_loss)) throw TrainingDiverged(epoch);
    report.epoch_losses.push_back(epoch_loss);
  }
  report.params = std::move(params);
  return report;
}

inline MlpParams mlp_train(MlpParams params, const SampleSet& data, Loss loss, const TrainConfig& cfg) {
  return mlp_fit(std::move(params), data, loss, cfg).params;
}

// Max over parameters of |analytic - fd| / max(|analytic|, |fd|, 1e-8),
// central differences with step 1e-5 on the mean objective over `data`.
inline double gradient_check(MlpParams params, const SampleSet& data, Loss loss, std::uint64_t negative_seed = 0) {
  params.validate();
  detail::check_shapes(params, data, loss);
  std::vector<std::size_t> all(data.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  std::vector<std::size_t> neg;
  if (loss == Loss::dv_mi_objective) {
    CounterRng rng(negative_seed, {0xe7a1});
    neg = random_derangement(all.size(), rng);
  }
  MlpParams grad = MlpParams::zeros(params.layer_sizes, params.hidden, params.output);
  batch_objective(params, data, loss, all, neg, &grad);

  constexpr double h = 1e-5;
  double worst = 0.0;
  for (std::size_t k = 0, m = params.parameter_count(); k < m; ++k) {
    const double saved = params.parameter(k);
    params.parameter(k) = saved + h;
    const double up = batch_objective(params, data, loss, all, neg, nullptr);
    params.parameter(k) = saved - h;
    const double down = batch_objective(params, data, loss, all, neg, nullptr);
    params.parameter(k) = saved;
    const double fd = (up - down) / (2.0 * h);
    const double an = grad.parameter(k);
    const double denom = std::max({std::fabs(an), std::fabs(fd), 1e-8});
    worst = std::max(worst, std::fabs(an - fd) / denom);
  }
  return worst;
}

inline double gradient_check(const MlpParams& params, const RealVector& input, const RealVector& target, Loss loss) {
  SampleSet one;
  one.pairs.emplace_back(input, target);
  return gradient_check(params, one, loss);
}

}  // namespace cdr::numeric
