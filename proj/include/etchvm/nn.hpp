#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace etchvm {

enum class Activation { relu, identity };

struct LayerSpec {
  std::size_t input_dim = 0;
  std::size_t output_dim = 0;
  Activation activation = Activation::identity;
  double dropout_prob = 0.0;
};

// The network used throughout: input -> 32 ReLU units with 20% inverted
// dropout -> 1 linear output.
inline std::vector<LayerSpec> paper_architecture(std::size_t input_dim) {
  return {{input_dim, 32, Activation::relu, 0.2},
          {32, 1, Activation::identity, 0.0}};
}

struct LayerParams {
  std::vector<double> weights;  // row-major, output_dim x input_dim
  std::vector<double> biases;   // output_dim
};

struct MlpParams {
  std::vector<LayerParams> layers;
};

enum class ForwardMode { train, deterministic };

struct LayerCache {
  std::vector<double> pre;   // z = Wx + b
  std::vector<double> post;  // after activation and dropout; input to next layer
  std::vector<double> mask;  // 0/1 per unit; all 1 when no dropout applied
  double scale = 1.0;        // 1/(1-p) in train mode, else 1
};

struct ForwardCache {
  std::vector<LayerCache> layers;
  ForwardMode mode = ForwardMode::deterministic;
};

inline void validate_specs(const std::vector<LayerSpec>& specs) {
  if (specs.empty()) throw DataError("network: no layers");
  for (std::size_t j = 0; j < specs.size(); ++j) {
    const auto& s = specs[j];
    if (s.input_dim < 1 || s.output_dim < 1)
      throw DataError("network: layer " + std::to_string(j) + " has zero dimension");
    if (!(s.dropout_prob >= 0.0) || !(s.dropout_prob < 1.0))
      throw DataError("network: layer " + std::to_string(j) +
                      " dropout_prob must be in [0, 1)");
    if (j > 0 && s.input_dim != specs[j - 1].output_dim)
      throw DataError("network: layer " + std::to_string(j) + " input_dim " +
                      std::to_string(s.input_dim) + " != previous output_dim " +
                      std::to_string(specs[j - 1].output_dim));
  }
}

inline void validate_shapes(const MlpParams& params,
                            const std::vector<LayerSpec>& specs) {
  if (params.layers.size() != specs.size())
    throw DataError("network: params have " + std::to_string(params.layers.size()) +
                    " layers, specs " + std::to_string(specs.size()));
  for (std::size_t j = 0; j < specs.size(); ++j) {
    if (params.layers[j].weights.size() != specs[j].input_dim * specs[j].output_dim ||
        params.layers[j].biases.size() != specs[j].output_dim)
      throw DataError("network: layer " + std::to_string(j) + " shape mismatch");
  }
}

// Uniform [-sqrt(1/fan_in), +sqrt(1/fan_in)] weights, zero biases.
inline MlpParams init_params(const std::vector<LayerSpec>& specs, std::uint64_t seed) {
  validate_specs(specs);
  Rng rng(seed);
  MlpParams params;
  params.layers.resize(specs.size());
  for (std::size_t j = 0; j < specs.size(); ++j) {
    const auto& s = specs[j];
    const double bound = std::sqrt(1.0 / static_cast<double>(s.input_dim));
    auto& layer = params.layers[j];
    layer.weights.resize(s.input_dim * s.output_dim);
    for (double& w : layer.weights) w = (2.0 * uniform01(rng) - 1.0) * bound;
    layer.biases.assign(s.output_dim, 0.0);
  }
  return params;
}

namespace detail {

inline void forward_layer(const LayerParams& layer, const LayerSpec& spec,
                          const double* in, LayerCache& cache, std::size_t layer_idx) {
  cache.pre.resize(spec.output_dim);
  cache.post.resize(spec.output_dim);
  for (std::size_t o = 0; o < spec.output_dim; ++o) {
    const double* wrow = layer.weights.data() + o * spec.input_dim;
    double z = layer.biases[o];
    for (std::size_t i = 0; i < spec.input_dim; ++i) z += wrow[i] * in[i];
    cache.pre[o] = z;
    cache.post[o] = (spec.activation == Activation::relu && z < 0.0) ? 0.0 : z;
  }
  for (double v : cache.post)
    if (!std::isfinite(v))
      throw NumericError("network: non-finite value in layer " +
                         std::to_string(layer_idx));
}

inline void apply_mask(LayerCache& cache) {
  for (std::size_t o = 0; o < cache.post.size(); ++o)
    cache.post[o] *= cache.mask[o] * cache.scale;
}

}  // namespace detail

// Evaluates the network. In train mode each layer's activation output is
// passed through an inverted-dropout mask (units zeroed with probability
// dropout_prob, survivors scaled by 1/(1-p)); deterministic mode drops and
// scales nothing. The cache, when given, records everything backward needs
// and is reused without reallocation across calls.
inline std::vector<double> forward(const MlpParams& params,
                                   const std::vector<LayerSpec>& specs,
                                   const std::vector<double>& x, ForwardMode mode,
                                   Rng* rng, ForwardCache* cache = nullptr) {
  validate_shapes(params, specs);
  if (x.size() != specs.front().input_dim)
    throw DataError("network: input size " + std::to_string(x.size()) +
                    " != layer 0 input_dim " + std::to_string(specs.front().input_dim));
  thread_local ForwardCache scratch;
  ForwardCache& c = cache ? *cache : scratch;
  c.mode = mode;
  c.layers.resize(specs.size());
  const double* in = x.data();
  for (std::size_t j = 0; j < specs.size(); ++j) {
    LayerCache& lc = c.layers[j];
    detail::forward_layer(params.layers[j], specs[j], in, lc, j);
    const double p = specs[j].dropout_prob;
    if (mode == ForwardMode::train && p > 0.0) {
      if (!rng)
        throw std::invalid_argument("forward: train mode with dropout needs an rng");
      lc.mask.resize(specs[j].output_dim);
      for (double& m : lc.mask) m = (uniform01(*rng) >= p) ? 1.0 : 0.0;
      lc.scale = 1.0 / (1.0 - p);
      detail::apply_mask(lc);
    } else {
      lc.mask.assign(specs[j].output_dim, 1.0);
      lc.scale = 1.0;
    }
    in = lc.post.data();
  }
  return c.layers.back().post;
}

inline std::vector<double> forward_deterministic(const MlpParams& params,
                                                 const std::vector<LayerSpec>& specs,
                                                 const std::vector<double>& x,
                                                 ForwardCache* cache = nullptr) {
  return forward(params, specs, x, ForwardMode::deterministic, nullptr, cache);
}

// Re-evaluates with the dropout masks and scales recorded in a previous
// cache instead of fresh draws (finite-difference checks need the masks held
// fixed while parameters move).
inline std::vector<double> forward_replay(const MlpParams& params,
                                          const std::vector<LayerSpec>& specs,
                                          const std::vector<double>& x,
                                          const ForwardCache& frozen) {
  validate_shapes(params, specs);
  if (frozen.layers.size() != specs.size())
    throw DataError("network: frozen cache layer count mismatch");
  std::vector<double> cur(x);
  LayerCache lc;
  for (std::size_t j = 0; j < specs.size(); ++j) {
    detail::forward_layer(params.layers[j], specs[j], cur.data(), lc, j);
    const auto& fl = frozen.layers[j];
    if (fl.mask.size() != specs[j].output_dim)
      throw DataError("network: frozen cache mask size mismatch");
    for (std::size_t o = 0; o < lc.post.size(); ++o)
      lc.post[o] *= fl.mask[o] * fl.scale;
    cur = lc.post;
  }
  return cur;
}

inline double mse(const std::vector<double>& predictions,
                  const std::vector<double>& targets) {
  if (predictions.size() != targets.size())
    throw std::invalid_argument("mse: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("mse: empty input");
  double sse = 0.0;
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    const double r = predictions[i] - targets[i];
    sse += r * r;
  }
  return sse / static_cast<double>(predictions.size());
}

namespace detail {

// Reverse pass; adds into grads (shapes must already match params).
inline void backward_accumulate(const MlpParams& params,
                                const std::vector<LayerSpec>& specs,
                                const ForwardCache& cache,
                                const std::vector<double>& x,
                                const std::vector<double>& loss_grad_y,
                                MlpParams& grads) {
  thread_local std::vector<double> g_cur, g_prev;
  g_cur.assign(loss_grad_y.begin(), loss_grad_y.end());
  for (std::size_t jj = specs.size(); jj-- > 0;) {
    const auto& spec = specs[jj];
    const auto& lc = cache.layers[jj];
    const double* a_prev = (jj == 0) ? x.data() : cache.layers[jj - 1].post.data();
    auto& g_layer = grads.layers[jj];
    const auto& p_layer = params.layers[jj];
    g_prev.assign(spec.input_dim, 0.0);
    for (std::size_t o = 0; o < spec.output_dim; ++o) {
      double g = g_cur[o] * lc.mask[o] * lc.scale;
      if (spec.activation == Activation::relu && lc.pre[o] <= 0.0) g = 0.0;
      if (g == 0.0) continue;
      g_layer.biases[o] += g;
      double* grow = g_layer.weights.data() + o * spec.input_dim;
      const double* wrow = p_layer.weights.data() + o * spec.input_dim;
      for (std::size_t i = 0; i < spec.input_dim; ++i) {
        grow[i] += g * a_prev[i];
        g_prev[i] += g * wrow[i];
      }
    }
    std::swap(g_cur, g_prev);
  }
}

}  // namespace detail

inline MlpParams zeros_like(const MlpParams& params) {
  MlpParams z;
  z.layers.resize(params.layers.size());
  for (std::size_t j = 0; j < params.layers.size(); ++j) {
    z.layers[j].weights.assign(params.layers[j].weights.size(), 0.0);
    z.layers[j].biases.assign(params.layers[j].biases.size(), 0.0);
  }
  return z;
}

// Exact reverse-mode gradient of loss_grad_y . y(x) with the dropout masks
// and scaling recorded in cache.
inline MlpParams backward(const MlpParams& params,
                          const std::vector<LayerSpec>& specs,
                          const ForwardCache& cache, const std::vector<double>& x,
                          const std::vector<double>& loss_grad_y) {
  validate_shapes(params, specs);
  if (cache.layers.size() != specs.size())
    throw DataError("backward: cache layer count mismatch");
  for (std::size_t j = 0; j < specs.size(); ++j)
    if (cache.layers[j].pre.size() != specs[j].output_dim ||
        cache.layers[j].mask.size() != specs[j].output_dim)
      throw DataError("backward: cache layer " + std::to_string(j) + " shape mismatch");
  if (loss_grad_y.size() != specs.back().output_dim)
    throw DataError("backward: loss gradient size mismatch");
  if (x.size() != specs.front().input_dim)
    throw DataError("backward: input size mismatch");
  MlpParams grads = zeros_like(params);
  detail::backward_accumulate(params, specs, cache, x, loss_grad_y, grads);
  return grads;
}

}  // namespace etchvm
