#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#include "data_model.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "linear_model.hpp"
#include "nn.hpp"

namespace etchvm {

inline constexpr const char* kModelFormatTag = "etchvm-model-v1";

enum class ModelKind { mlp, linear };

// Everything a prediction needs, as read back from a model file. The mlp
// variant carries the standardization fitted on its training rows; linear
// models consume raw features and carry no stats.
struct LoadedModel {
  ModelKind kind = ModelKind::mlp;
  std::vector<std::string> feature_names;
  std::vector<LayerSpec> specs;
  MlpParams params;
  StandardizationStats stats;
  std::uint64_t seed = 0;
  LinearModel linear;
};

namespace detail {

inline std::string join_names(const std::vector<std::string>& names) {
  std::string out;
  for (std::size_t i = 0; i < names.size(); ++i) {
    if (i) out.push_back(',');
    out += names[i];
  }
  return out;
}

inline std::string join_values(const std::vector<double>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (i) out.push_back(' ');
    out += format_double(values[i]);
  }
  return out;
}

inline std::vector<double> parse_values(const std::string& text,
                                        const std::string& where) {
  std::vector<double> out;
  std::istringstream in(text);
  std::string tok;
  while (in >> tok) out.push_back(parse_double(tok, where));
  return out;
}

class KeyValueFile {
 public:
  KeyValueFile(const std::filesystem::path& path) : path_(path.string()) {
    std::ifstream in(path);
    if (!in) throw DataError(path_ + ": cannot open");
    std::string line;
    std::size_t lineno = 0;
    while (std::getline(in, line)) {
      ++lineno;
      std::string_view sv = trim(line);
      if (sv.empty() || sv.front() == '#') continue;
      const auto eq = sv.find('=');
      if (eq == std::string_view::npos)
        throw DataError(path_ + ": line " + std::to_string(lineno) +
                        ": expected 'key = value'");
      std::string key(trim(sv.substr(0, eq)));
      std::string value(trim(sv.substr(eq + 1)));
      if (!entries_.emplace(std::move(key), std::move(value)).second)
        throw DataError(path_ + ": duplicate key '" +
                        std::string(trim(sv.substr(0, eq))) + "'");
    }
  }

  const std::string& get(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end())
      throw DataError(path_ + ": missing key '" + key + "'");
    return it->second;
  }

  const std::string& where() const { return path_; }

 private:
  std::string path_;
  std::map<std::string, std::string> entries_;
};

}  // namespace detail

inline void save_mlp_model(const std::filesystem::path& path,
                           const std::vector<LayerSpec>& specs,
                           const MlpParams& params,
                           const StandardizationStats& stats,
                           const std::vector<std::string>& feature_names,
                           std::uint64_t seed) {
  validate_shapes(params, specs);
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write");
  out << "format = " << kModelFormatTag << '\n';
  out << "kind = mlp\n";
  out << "features = " << detail::join_names(feature_names) << '\n';
  out << "seed = " << seed << '\n';
  out << "standardize.mean = " << detail::join_values(stats.mean) << '\n';
  out << "standardize.std = " << detail::join_values(stats.std_dev) << '\n';
  out << "layers = " << specs.size() << '\n';
  for (std::size_t j = 0; j < specs.size(); ++j) {
    const std::string prefix = "layer" + std::to_string(j) + ".";
    out << prefix << "input_dim = " << specs[j].input_dim << '\n';
    out << prefix << "output_dim = " << specs[j].output_dim << '\n';
    out << prefix << "activation = "
        << (specs[j].activation == Activation::relu ? "relu" : "identity") << '\n';
    out << prefix << "dropout = " << format_double(specs[j].dropout_prob) << '\n';
    out << prefix << "weights = " << detail::join_values(params.layers[j].weights) << '\n';
    out << prefix << "biases = " << detail::join_values(params.layers[j].biases) << '\n';
  }
}

inline void save_linear_model(const std::filesystem::path& path,
                              const LinearModel& model,
                              const std::vector<std::string>& feature_names) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write");
  out << "format = " << kModelFormatTag << '\n';
  out << "kind = linear\n";
  out << "features = " << detail::join_names(feature_names) << '\n';
  out << "with_bias = " << (model.with_bias ? 1 : 0) << '\n';
  out << "weights = " << detail::join_values(model.weights) << '\n';
  out << "bias = " << format_double(model.bias) << '\n';
}

inline LoadedModel load_model(const std::filesystem::path& path) {
  detail::KeyValueFile kv(path);
  const std::string& where = kv.where();
  if (kv.get("format") != kModelFormatTag)
    throw DataError(where + ": unsupported format '" + kv.get("format") + "'");
  LoadedModel model;
  {
    std::string names = kv.get("features");
    std::string cur;
    for (char c : names) {
      if (c == ',') {
        model.feature_names.push_back(std::string(trim(cur)));
        cur.clear();
      } else {
        cur.push_back(c);
      }
    }
    if (!std::string(trim(cur)).empty())
      model.feature_names.push_back(std::string(trim(cur)));
  }
  const std::string& kind = kv.get("kind");
  if (kind == "linear") {
    model.kind = ModelKind::linear;
    model.linear.with_bias = parse_uint(kv.get("with_bias"), where) != 0;
    model.linear.weights = detail::parse_values(kv.get("weights"), where);
    model.linear.bias = parse_double(kv.get("bias"), where);
    if (!model.linear.with_bias && model.linear.bias != 0.0)
      throw DataError(where + ": bias must be 0 when with_bias = 0");
    return model;
  }
  if (kind != "mlp")
    throw DataError(where + ": unknown model kind '" + kind + "'");
  model.kind = ModelKind::mlp;
  model.seed = parse_uint(kv.get("seed"), where);
  model.stats.mean = detail::parse_values(kv.get("standardize.mean"), where);
  model.stats.std_dev = detail::parse_values(kv.get("standardize.std"), where);
  if (model.stats.mean.size() != model.stats.std_dev.size())
    throw DataError(where + ": standardization mean/std length mismatch");
  const std::size_t layers = static_cast<std::size_t>(parse_uint(kv.get("layers"), where));
  if (layers == 0) throw DataError(where + ": layers must be >= 1");
  for (std::size_t j = 0; j < layers; ++j) {
    const std::string prefix = "layer" + std::to_string(j) + ".";
    LayerSpec spec;
    spec.input_dim = static_cast<std::size_t>(parse_uint(kv.get(prefix + "input_dim"), where));
    spec.output_dim = static_cast<std::size_t>(parse_uint(kv.get(prefix + "output_dim"), where));
    const std::string& act = kv.get(prefix + "activation");
    if (act == "relu") spec.activation = Activation::relu;
    else if (act == "identity") spec.activation = Activation::identity;
    else throw DataError(where + ": unknown activation '" + act + "'");
    spec.dropout_prob = parse_double(kv.get(prefix + "dropout"), where);
    LayerParams lp;
    lp.weights = detail::parse_values(kv.get(prefix + "weights"), where);
    lp.biases = detail::parse_values(kv.get(prefix + "biases"), where);
    model.specs.push_back(spec);
    model.params.layers.push_back(std::move(lp));
  }
  validate_specs(model.specs);
  validate_shapes(model.params, model.specs);
  if (model.stats.mean.size() != model.specs.front().input_dim)
    throw DataError(where + ": standardization dimension != network input_dim");
  return model;
}

}  // namespace etchvm
