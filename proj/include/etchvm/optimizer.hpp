#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "data_model.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "nn.hpp"
#include "rng.hpp"

namespace etchvm {

struct AdamState {
  MlpParams m;
  MlpParams v;
  std::size_t t = 0;
};

inline AdamState make_adam_state(const MlpParams& params) {
  return {zeros_like(params), zeros_like(params), 0};
}

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  double weight_decay = 1e-4;
  bool decoupled_weight_decay = false;
  std::size_t epochs = 5000;
  std::uint64_t seed = 0;
};

inline void validate(const TrainConfig& c) {
  if (!(c.learning_rate > 0.0)) throw DataError("config: learning_rate must be > 0");
  if (!(c.beta1 > 0.0 && c.beta1 < 1.0)) throw DataError("config: beta1 must be in (0,1)");
  if (!(c.beta2 > 0.0 && c.beta2 < 1.0)) throw DataError("config: beta2 must be in (0,1)");
  if (!(c.epsilon > 0.0)) throw DataError("config: epsilon must be > 0");
  if (!(c.weight_decay >= 0.0)) throw DataError("config: weight_decay must be >= 0");
}

namespace detail {

inline void adam_update_span(std::vector<double>& p, const std::vector<double>& g,
                             std::vector<double>& m, std::vector<double>& v,
                             const TrainConfig& c, double bc1, double bc2) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (!std::isfinite(g[i])) throw NumericError("adam: non-finite gradient");
    const double grad =
        c.decoupled_weight_decay ? g[i] : g[i] + c.weight_decay * p[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad;
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad * grad;
    const double mh = m[i] / bc1;
    const double vh = v[i] / bc2;
    if (c.decoupled_weight_decay) p[i] -= c.learning_rate * c.weight_decay * p[i];
    p[i] -= c.learning_rate * mh / (std::sqrt(vh) + c.epsilon);
  }
}

}  // namespace detail

// One Adam update with coupled L2 weight decay (decay folded into the
// gradient; the decoupled variant is a config switch). Bias correction uses
// the incremented step counter, so the first step sees t = 1.
inline void adam_step_inplace(MlpParams& params, const MlpParams& grads,
                              AdamState& state, const TrainConfig& config) {
  validate(config);
  if (grads.layers.size() != params.layers.size())
    throw DataError("adam: gradient shape mismatch");
  state.t += 1;
  const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(state.t));
  const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(state.t));
  for (std::size_t j = 0; j < params.layers.size(); ++j) {
    auto& pl = params.layers[j];
    const auto& gl = grads.layers[j];
    if (gl.weights.size() != pl.weights.size() || gl.biases.size() != pl.biases.size())
      throw DataError("adam: gradient shape mismatch in layer " + std::to_string(j));
    detail::adam_update_span(pl.weights, gl.weights, state.m.layers[j].weights,
                             state.v.layers[j].weights, config, bc1, bc2);
    detail::adam_update_span(pl.biases, gl.biases, state.m.layers[j].biases,
                             state.v.layers[j].biases, config, bc1, bc2);
  }
}

inline std::pair<MlpParams, AdamState> adam_step(MlpParams params,
                                                 const MlpParams& grads,
                                                 AdamState state,
                                                 const TrainConfig& config) {
  adam_step_inplace(params, grads, state, config);
  return {std::move(params), std::move(state)};
}

struct TrainResult {
  MlpParams params;
  std::vector<double> loss_history;
};

inline constexpr double kDivergenceBound = 1e12;

// Full-batch training: every epoch evaluates all samples in train mode with
// fresh dropout masks from the seeded stream, accumulates the exact MSE
// gradient, and applies one Adam step. Deterministic for a fixed config.
inline TrainResult train(const std::vector<LayerSpec>& specs, const Dataset& data,
                         const TrainConfig& config) {
  validate_specs(specs);
  validate(config);
  if (data.size() == 0) throw DataError("train: empty dataset");
  if (data.dim() != specs.front().input_dim)
    throw DataError("train: dataset dim " + std::to_string(data.dim()) +
                    " != network input_dim " +
                    std::to_string(specs.front().input_dim));
  if (specs.back().output_dim != 1)
    throw DataError("train: network must have one output");
  for (double t : data.targets)
    if (!std::isfinite(t)) throw DataError("train: non-finite target");

  const std::size_t n = data.size();
  TrainResult out;
  out.params = init_params(specs, derive_seed(config.seed, "init"));
  AdamState state = make_adam_state(out.params);
  Rng dropout_rng(derive_seed(config.seed, "dropout"));
  MlpParams grads = zeros_like(out.params);
  ForwardCache cache;
  std::vector<double> loss_grad(1);
  out.loss_history.reserve(config.epochs);

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (auto& layer : grads.layers) {
      std::fill(layer.weights.begin(), layer.weights.end(), 0.0);
      std::fill(layer.biases.begin(), layer.biases.end(), 0.0);
    }
    double sse = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const auto y = forward(out.params, specs, data.features[i],
                             ForwardMode::train, &dropout_rng, &cache);
      const double r = y[0] - data.targets[i];
      sse += r * r;
      loss_grad[0] = 2.0 * r / static_cast<double>(n);
      detail::backward_accumulate(out.params, specs, cache, data.features[i],
                                  loss_grad, grads);
    }
    const double loss = sse / static_cast<double>(n);
    if (!std::isfinite(loss) || loss > kDivergenceBound)
      throw DivergenceError("train: diverged at epoch " + std::to_string(epoch) +
                                " (loss " + format_double(loss) + ")",
                            epoch);
    out.loss_history.push_back(loss);
    adam_step_inplace(out.params, grads, state, config);
  }
  return out;
}

// Flat `key = value` config file mirroring TrainConfig; unknown keys are
// errors so typos cannot silently fall back to defaults.
inline TrainConfig load_train_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  TrainConfig c;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view sv = trim(line);
    if (sv.empty() || sv.front() == '#') continue;
    const auto eq = sv.find('=');
    const std::string where = path.string() + ": line " + std::to_string(lineno);
    if (eq == std::string_view::npos)
      throw DataError(where + ": expected 'key = value'");
    const std::string key(trim(sv.substr(0, eq)));
    const std::string_view val = trim(sv.substr(eq + 1));
    if (key == "learning_rate") c.learning_rate = parse_double(val, where);
    else if (key == "beta1") c.beta1 = parse_double(val, where);
    else if (key == "beta2") c.beta2 = parse_double(val, where);
    else if (key == "epsilon") c.epsilon = parse_double(val, where);
    else if (key == "weight_decay") c.weight_decay = parse_double(val, where);
    else if (key == "decoupled_weight_decay")
      c.decoupled_weight_decay = parse_uint(val, where) != 0;
    else if (key == "epochs") c.epochs = static_cast<std::size_t>(parse_uint(val, where));
    else if (key == "seed") c.seed = parse_uint(val, where);
    else throw DataError(where + ": unknown key '" + key + "'");
  }
  validate(c);
  return c;
}

}  // namespace etchvm
