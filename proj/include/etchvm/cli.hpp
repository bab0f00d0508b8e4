#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "csv.hpp"
#include "data_model.hpp"
#include "dic.hpp"
#include "errors.hpp"
#include "format.hpp"
#include "model_io.hpp"
#include "nn.hpp"
#include "optimizer.hpp"
#include "rng.hpp"
#include "synth.hpp"
#include "uncertainty.hpp"

namespace etchvm {
namespace cli {

struct CommandOutcome {
  int exit_code = 0;
  std::vector<std::string> report_paths;
};

namespace detail {

inline std::string sanitize(std::string msg) {
  for (char& c : msg)
    if (c == '\n' || c == '\r' || c == '"') c = '\'';
  return msg;
}

inline void print_error(std::ostream& err, const std::string& kind,
                        const std::string& msg) {
  err << "etchvm: error kind=" << kind << " msg=\"" << sanitize(msg) << "\"\n";
}

inline std::string percent(double frac) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f%%", 100.0 * frac);
  return buf;
}

inline std::vector<std::string> coverage_lines(const CoverageReport& rep) {
  auto line = [&](const char* label, double frac, std::size_t count) {
    return std::string(label) + ": " + percent(frac) + " (" +
           std::to_string(count) + "/" + std::to_string(rep.total) + ")";
  };
  return {line("1sigma", rep.frac_within_1sigma, rep.count_within_1sigma),
          line("2sigma", rep.frac_within_2sigma_only, rep.count_within_2sigma_only),
          line("outside", rep.frac_outside, rep.count_outside)};
}

inline void write_key_value_file(const std::filesystem::path& path,
                                 const std::vector<std::pair<std::string, std::string>>& kv) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError(path.string() + ": cannot write");
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

enum class CsvKind { process, rgb, depth_target };

inline CsvKind detect_csv_kind(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(path.string() + ": cannot open");
  std::string header;
  std::getline(in, header);
  const std::string h(trim(header));
  if (h == kProcessCsvHeader) return CsvKind::process;
  if (h == kRgbCsvHeader) return CsvKind::rgb;
  if (h == kDepthTargetCsvHeader) return CsvKind::depth_target;
  throw DataError(path.string() + ": unrecognized CSV header '" + h + "'");
}

// Feature rows plus targets (NaN where the file carries no truth).
struct FeatureTable {
  std::vector<std::vector<double>> features;
  std::vector<double> truths;
  std::vector<std::string> feature_names;
};

inline FeatureTable load_feature_table(const std::filesystem::path& path,
                                       const std::vector<std::string>& wanted_names,
                                       double reference_nm) {
  const CsvKind kind = detect_csv_kind(path);
  FeatureTable table;
  if (wanted_names == process_feature_names()) {
    if (kind == CsvKind::process) {
      for (const auto& rec : load_process_csv(path)) {
        table.features.push_back({rec.condition.pressure, rec.condition.cf4_flow,
                                  rec.condition.rf_top_power});
        table.truths.push_back(etch_depth(rec, reference_nm));
      }
    } else if (kind == CsvKind::depth_target) {
      for (const auto& row : load_depth_target_csv(path, true)) {
        table.features.push_back({row.condition.pressure, row.condition.cf4_flow,
                                  row.condition.rf_top_power});
        table.truths.push_back(row.depth_nm);
      }
    } else {
      throw DataError(path.string() +
                      ": model expects process features, got an RGB CSV");
    }
    table.feature_names = process_feature_names();
  } else if (wanted_names == rgb_feature_names()) {
    if (kind != CsvKind::rgb)
      throw DataError(path.string() +
                      ": model expects RGB features, got a process CSV");
    for (const auto& s : load_rgb_csv(path, true)) {
      table.features.push_back({s.r, s.g, s.b});
      table.truths.push_back(s.depth_nm);
    }
    table.feature_names = rgb_feature_names();
  } else {
    std::string names;
    for (const auto& n : wanted_names) names += n + " ";
    throw DataError("model has unsupported feature set: " + names);
  }
  return table;
}

struct TrainingData {
  Dataset dataset;
  std::size_t default_val_count = 0;
  bool per_point = false;
};

inline TrainingData load_training_data(const std::string& features,
                                       const std::filesystem::path& path,
                                       bool per_point, double reference_nm) {
  TrainingData td;
  td.per_point = per_point;
  if (features == "process") {
    const auto recs = load_process_csv(path);
    td.dataset = per_point ? make_per_point_dataset(recs, reference_nm)
                           : make_mean_depth_dataset(recs, reference_nm);
  } else if (features == "rgb") {
    td.dataset = make_rgb_dataset(load_rgb_csv(path));
  } else {
    throw DataError("unknown --features '" + features + "', expected process or rgb");
  }
  const std::size_t n = td.dataset.size();
  if (per_point)
    td.default_val_count = (n == 756) ? 152
                                      : std::max<std::size_t>(1, static_cast<std::size_t>(
                                            std::llround(0.2 * static_cast<double>(n))));
  else
    td.default_val_count = (n == 84) ? 7
                                     : std::max<std::size_t>(1, static_cast<std::size_t>(
                                           std::llround(static_cast<double>(n) / 12.0)));
  return td;
}

inline double validation_mse_mlp(const LoadedModel& model, const Dataset& val_raw) {
  std::vector<double> preds;
  preds.reserve(val_raw.size());
  for (const auto& row : val_raw.features) {
    const auto x = standardize_row(row, model.stats);
    preds.push_back(forward_deterministic(model.params, model.specs, x)[0]);
  }
  return mse(preds, val_raw.targets);
}

struct SynthOutputs {
  std::vector<WaferRecord> records;
  std::vector<RgbSample> rgb_mean;
  std::vector<RgbSample> rgb_per_point;
  DepthOracle depth_oracle;
  RgbOracle rgb_oracle;
  std::vector<std::string> paths;
};

inline SynthOutputs run_synth_phase(const std::filesystem::path& out_dir,
                                    std::uint64_t seed, double noise_nm,
                                    double reference_nm) {
  std::filesystem::create_directories(out_dir);
  SynthOutputs so;
  so.depth_oracle = fit_depth_oracle(depth_anchors());
  so.rgb_oracle = fit_rgb_oracle(rgb_anchors());
  const auto grid = process_grid();
  so.records = generate_process_dataset(so.depth_oracle, grid, noise_nm,
                                        derive_seed(seed, "noise"), reference_nm);
  so.rgb_mean = generate_rgb_samples(so.rgb_oracle, so.records, reference_nm);
  so.rgb_per_point =
      generate_rgb_per_point_samples(so.rgb_oracle, so.records, reference_nm);

  const auto process_path = out_dir / "process.csv";
  const auto rgb_path = out_dir / "rgb.csv";
  const auto rgb_pp_path = out_dir / "rgb_per_point.csv";
  const auto manifest_path = out_dir / "synth_manifest.txt";
  save_process_csv(process_path, so.records);
  save_rgb_csv(rgb_path, so.rgb_mean);
  save_rgb_csv(rgb_pp_path, so.rgb_per_point);

  std::vector<std::pair<std::string, std::string>> kv;
  kv.emplace_back("format", "etchvm-synth-manifest-v1");
  kv.emplace_back("seed", std::to_string(seed));
  kv.emplace_back("noise_nm", format_double(noise_nm));
  kv.emplace_back("reference_nm", format_double(reference_nm));
  kv.emplace_back("grid_points", std::to_string(so.records.size()));
  kv.emplace_back("points_per_wafer", std::to_string(kThicknessPoints));
  for (std::size_t i = 0; i < so.depth_oracle.coeffs.size(); ++i)
    kv.emplace_back("depth.c" + std::to_string(i),
                    format_double(so.depth_oracle.coeffs[i]));
  kv.emplace_back("depth.fit_residual_max",
                  format_double(so.depth_oracle.fit_residual_max));
  const char* chan = "rgb";
  for (std::size_t ch = 0; ch < 3; ++ch)
    for (std::size_t i = 0; i < 3; ++i)
      kv.emplace_back(std::string("rgb.") + chan[ch] + ".c" + std::to_string(i),
                      format_double(so.rgb_oracle.quad[ch][i]));
  auto join3 = [](const std::array<double, 3>& a) {
    return format_double(a[0]) + " " + format_double(a[1]) + " " + format_double(a[2]);
  };
  kv.emplace_back("rgb.ripple.amplitude", join3(kRgbRippleAmplitude));
  kv.emplace_back("rgb.ripple.period_nm", join3(kRgbRipplePeriodNm));
  kv.emplace_back("rgb.ripple.phase", join3(kRgbRipplePhase));
  kv.emplace_back("rgb.fit_residual_max",
                  format_double(so.rgb_oracle.fit_residual_max));
  write_key_value_file(manifest_path, kv);

  so.paths = {process_path.string(), rgb_path.string(), rgb_pp_path.string(),
              manifest_path.string()};
  return so;
}

}  // namespace detail

// Parses and executes one subcommand. args excludes the program name.
// Exit codes: 0 success, 1 usage error, 2 data error, 3 numerical failure.
inline CommandOutcome run(const std::vector<std::string>& args,
                          std::ostream& out = std::cout,
                          std::ostream& err = std::cerr) {
  CLI::App app{"virtual metrology for plasma-etch depth"};
  app.require_subcommand(1);

  struct {
    std::uint64_t seed = 0;
    double noise_nm = 1.0;
    std::string out_dir = ".";
    double reference_nm = kReferenceThicknessNm;
  } synth_opt;
  auto* synth_cmd = app.add_subcommand(
      "synth", "calibrate oracles and emit the synthetic dataset CSVs");
  synth_cmd->add_option("--seed", synth_opt.seed, "master seed");
  synth_cmd->add_option("--noise-nm", synth_opt.noise_nm, "thickness noise std [nm]");
  synth_cmd->add_option("--out-dir", synth_opt.out_dir, "output directory");
  synth_cmd->add_option("--reference-nm", synth_opt.reference_nm,
                        "pre-etch reference thickness [nm]");

  struct TrainCommonOpt {
    std::string features;
    std::string data;
    bool per_point = false;
    std::int64_t val_count = -1;
    std::uint64_t seed = 0;
    std::string model_out;
    std::string summary_out;
    double reference_nm = kReferenceThicknessNm;
  };
  auto add_train_common = [](CLI::App* cmd, TrainCommonOpt& opt) {
    cmd->add_option("--features", opt.features, "feature set: process or rgb")
        ->required()
        ->check(CLI::IsMember({"process", "rgb"}));
    cmd->add_option("--data", opt.data, "input CSV")->required();
    cmd->add_flag("--per-point", opt.per_point,
                  "per-point mode (nine samples per wafer)");
    cmd->add_option("--val-count", opt.val_count,
                    "validation rows (default 7 mean-depth, 152 per-point)")
        ->check(CLI::NonNegativeNumber);
    cmd->add_option("--seed", opt.seed, "master seed (drives split and training)");
    cmd->add_option("--model-out", opt.model_out, "model file to write");
    cmd->add_option("--summary-out", opt.summary_out, "flat key-value summary file");
    cmd->add_option("--reference-nm", opt.reference_nm,
                    "pre-etch reference thickness [nm]");
  };

  TrainCommonOpt ann_opt;
  ann_opt.model_out = "model_ann.txt";
  struct {
    std::string config;
    std::int64_t epochs = -1;
    double learning_rate = -1.0;
    double weight_decay = -1.0;
    double beta1 = -1.0;
    double beta2 = -1.0;
    double epsilon = -1.0;
    bool decoupled = false;
  } ann_cfg;
  auto* train_ann_cmd = app.add_subcommand(
      "train-ann", "train the dropout network on a split of the data");
  add_train_common(train_ann_cmd, ann_opt);
  train_ann_cmd->add_option("--config", ann_cfg.config, "training config file");
  train_ann_cmd->add_option("--epochs", ann_cfg.epochs, "training epochs")
      ->check(CLI::NonNegativeNumber);
  train_ann_cmd->add_option("--learning-rate", ann_cfg.learning_rate, "Adam learning rate");
  train_ann_cmd->add_option("--weight-decay", ann_cfg.weight_decay, "L2 weight decay");
  train_ann_cmd->add_option("--beta1", ann_cfg.beta1, "Adam beta1");
  train_ann_cmd->add_option("--beta2", ann_cfg.beta2, "Adam beta2");
  train_ann_cmd->add_option("--epsilon", ann_cfg.epsilon, "Adam epsilon");
  train_ann_cmd->add_flag("--decoupled-wd", ann_cfg.decoupled,
                          "decouple weight decay from the gradient");

  TrainCommonOpt lin_opt;
  lin_opt.model_out = "model_linear.txt";
  struct {
    bool no_bias = false;
    std::string compare_model;
  } lin_extra;
  auto* train_linear_cmd = app.add_subcommand(
      "train-linear", "fit the least-squares baseline on the identical split");
  add_train_common(train_linear_cmd, lin_opt);
  train_linear_cmd->add_flag("--no-bias", lin_extra.no_bias, "fit without a bias term");
  train_linear_cmd->add_option("--compare-model", lin_extra.compare_model,
                               "network model file to evaluate on the same split");

  struct {
    std::string model;
    std::string data;
    std::string out;
    double reference_nm = kReferenceThicknessNm;
  } predict_opt;
  auto* predict_cmd = app.add_subcommand("predict", "point predictions from a model file");
  predict_cmd->add_option("--model", predict_opt.model, "model file")->required();
  predict_cmd->add_option("--data", predict_opt.data, "feature CSV")->required();
  predict_cmd->add_option("--out", predict_opt.out, "prediction CSV to write");
  predict_cmd->add_option("--reference-nm", predict_opt.reference_nm,
                          "pre-etch reference thickness [nm]");

  struct {
    std::string model;
    std::string data;
    std::size_t passes = 50;
    std::uint64_t seed = 0;
    std::string out = "bnn_report.csv";
    double reference_nm = kReferenceThicknessNm;
  } bnn_opt;
  auto* bnn_cmd = app.add_subcommand(
      "bnn-predict", "MC-Dropout predictive means and uncertainties");
  bnn_cmd->add_option("--model", bnn_opt.model, "network model file")->required();
  bnn_cmd->add_option("--data", bnn_opt.data, "feature CSV")->required();
  bnn_cmd->add_option("--passes", bnn_opt.passes, "stochastic forward passes");
  bnn_cmd->add_option("--seed", bnn_opt.seed, "master seed");
  bnn_cmd->add_option("--out", bnn_opt.out, "prediction report CSV");
  bnn_cmd->add_option("--reference-nm", bnn_opt.reference_nm,
                      "pre-etch reference thickness [nm]");

  struct {
    std::string report;
  } cov_opt;
  auto* coverage_cmd = app.add_subcommand(
      "coverage", "sigma-band summary of a prediction report with truths");
  coverage_cmd->add_option("--report", cov_opt.report, "prediction report CSV")
      ->required();

  struct {
    std::string image;
    std::vector<std::size_t> rect;
    std::string out = "rgb.csv";
    double depth_nm = std::numeric_limits<double>::quiet_NaN();
  } extract_opt;
  auto* extract_cmd = app.add_subcommand(
      "extract-rgb", "mean RGB of an image region, appended to an RGB CSV");
  extract_cmd->add_option("--image", extract_opt.image, "P3/P6 portable pixmap")
      ->required();
  extract_cmd->add_option("--rect", extract_opt.rect, "region: x0 y0 width height")
      ->expected(4)
      ->required();
  extract_cmd->add_option("--out", extract_opt.out, "RGB CSV to append to");
  extract_cmd->add_option("--depth-nm", extract_opt.depth_nm,
                          "known depth for this sample (omit for prediction input)");

  struct {
    std::uint64_t seed = 0;
    double noise_nm = 1.0;
    std::size_t passes = 50;
    std::string out_dir = ".";
    double reference_nm = kReferenceThicknessNm;
    std::string summary_out;
    std::string config;
    std::int64_t epochs = -1;
    double learning_rate = -1.0;
    double weight_decay = -1.0;
  } eval_opt;
  auto* evaluate_cmd = app.add_subcommand(
      "evaluate", "one-shot pipeline: synth, train both models, bnn, coverage");
  evaluate_cmd->add_option("--seed", eval_opt.seed, "master seed");
  evaluate_cmd->add_option("--noise-nm", eval_opt.noise_nm, "thickness noise std [nm]");
  evaluate_cmd->add_option("--passes", eval_opt.passes, "stochastic forward passes");
  evaluate_cmd->add_option("--out-dir", eval_opt.out_dir, "output directory");
  evaluate_cmd->add_option("--reference-nm", eval_opt.reference_nm,
                           "pre-etch reference thickness [nm]");
  evaluate_cmd->add_option("--summary-out", eval_opt.summary_out,
                           "flat key-value summary file");
  evaluate_cmd->add_option("--config", eval_opt.config, "training config file");
  evaluate_cmd->add_option("--epochs", eval_opt.epochs, "training epochs")
      ->check(CLI::NonNegativeNumber);
  evaluate_cmd->add_option("--learning-rate", eval_opt.learning_rate, "Adam learning rate");
  evaluate_cmd->add_option("--weight-decay", eval_opt.weight_decay, "L2 weight decay");

  CommandOutcome outcome;
  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(std::move(reversed));

    if (synth_cmd->parsed()) {
      const auto so = detail::run_synth_phase(synth_opt.out_dir, synth_opt.seed,
                                              synth_opt.noise_nm,
                                              synth_opt.reference_nm);
      out << "depth oracle residual = " << format_double(so.depth_oracle.fit_residual_max)
          << " nm, rgb oracle residual = "
          << format_double(so.rgb_oracle.fit_residual_max) << " counts\n";
      out << "wrote " << so.records.size() << " process records, "
          << so.rgb_mean.size() << " rgb rows, " << so.rgb_per_point.size()
          << " rgb per-point rows\n";
      for (const auto& p : so.paths) out << "wrote " << p << '\n';
      outcome.report_paths = so.paths;
    } else if (train_ann_cmd->parsed()) {
      const auto td = detail::load_training_data(ann_opt.features, ann_opt.data,
                                                 ann_opt.per_point,
                                                 ann_opt.reference_nm);
      const std::size_t n_val = ann_opt.val_count >= 0
                                    ? static_cast<std::size_t>(ann_opt.val_count)
                                    : td.default_val_count;
      const auto split = split_random(td.dataset.size(), n_val,
                                      derive_seed(ann_opt.seed, "split"));
      const Dataset train_raw = select_rows(td.dataset, split.train);
      const Dataset val_raw = select_rows(td.dataset, split.validation);
      const auto stats = fit_standardization(train_raw);
      const Dataset train_std = apply_standardization(train_raw, stats);

      TrainConfig config = ann_cfg.config.empty()
                               ? TrainConfig{}
                               : load_train_config(ann_cfg.config);
      if (ann_cfg.epochs >= 0) config.epochs = static_cast<std::size_t>(ann_cfg.epochs);
      if (ann_cfg.learning_rate > 0) config.learning_rate = ann_cfg.learning_rate;
      if (ann_cfg.weight_decay >= 0) config.weight_decay = ann_cfg.weight_decay;
      if (ann_cfg.beta1 > 0) config.beta1 = ann_cfg.beta1;
      if (ann_cfg.beta2 > 0) config.beta2 = ann_cfg.beta2;
      if (ann_cfg.epsilon > 0) config.epsilon = ann_cfg.epsilon;
      if (ann_cfg.decoupled) config.decoupled_weight_decay = true;
      config.seed = ann_opt.seed;

      const auto specs = paper_architecture(train_std.dim());
      const auto result = train(specs, train_std, config);
      save_mlp_model(ann_opt.model_out, specs, result.params, stats,
                     td.dataset.feature_names, ann_opt.seed);

      std::vector<double> val_preds;
      for (const auto& row : val_raw.features)
        val_preds.push_back(
            forward_deterministic(result.params, specs, standardize_row(row, stats))[0]);
      const double val_mse = mse(val_preds, val_raw.targets);
      out << "train samples = " << train_raw.size() << '\n';
      out << "validation samples = " << val_raw.size() << '\n';
      out << "final training MSE = " << format_double(result.loss_history.empty()
                                                          ? 0.0
                                                          : result.loss_history.back())
          << '\n';
      out << "validation MSE = " << format_double(val_mse) << '\n';
      out << "wrote " << ann_opt.model_out << '\n';
      outcome.report_paths.push_back(ann_opt.model_out);
      if (!ann_opt.summary_out.empty()) {
        detail::write_key_value_file(
            ann_opt.summary_out,
            {{"command", "train-ann"},
             {"features", ann_opt.features},
             {"train_samples", std::to_string(train_raw.size())},
             {"validation_samples", std::to_string(val_raw.size())},
             {"train_mse", format_double(result.loss_history.empty()
                                             ? 0.0
                                             : result.loss_history.back())},
             {"validation_mse", format_double(val_mse)},
             {"model", ann_opt.model_out},
             {"seed", std::to_string(ann_opt.seed)}});
        outcome.report_paths.push_back(ann_opt.summary_out);
      }
    } else if (train_linear_cmd->parsed()) {
      const auto td = detail::load_training_data(lin_opt.features, lin_opt.data,
                                                 lin_opt.per_point,
                                                 lin_opt.reference_nm);
      const std::size_t n_val = lin_opt.val_count >= 0
                                    ? static_cast<std::size_t>(lin_opt.val_count)
                                    : td.default_val_count;
      const auto split = split_random(td.dataset.size(), n_val,
                                      derive_seed(lin_opt.seed, "split"));
      const Dataset train_raw = select_rows(td.dataset, split.train);
      const Dataset val_raw = select_rows(td.dataset, split.validation);
      const auto model = fit_linear(train_raw, !lin_extra.no_bias);
      save_linear_model(lin_opt.model_out, model, td.dataset.feature_names);
      const double val_mse = mse(predict_linear(model, val_raw), val_raw.targets);
      out << "train samples = " << train_raw.size() << '\n';
      out << "validation samples = " << val_raw.size() << '\n';
      out << "validation MSE = " << format_double(val_mse) << '\n';
      std::vector<std::pair<std::string, std::string>> kv{
          {"command", "train-linear"},
          {"features", lin_opt.features},
          {"train_samples", std::to_string(train_raw.size())},
          {"validation_samples", std::to_string(val_raw.size())},
          {"validation_mse", format_double(val_mse)},
          {"model", lin_opt.model_out},
          {"seed", std::to_string(lin_opt.seed)}};
      if (!lin_extra.compare_model.empty()) {
        const auto ann = load_model(lin_extra.compare_model);
        if (ann.kind != ModelKind::mlp)
          throw DataError(lin_extra.compare_model + ": --compare-model must be a network model");
        if (ann.feature_names != td.dataset.feature_names)
          throw DataError(lin_extra.compare_model + ": feature set differs from --data");
        const double ann_mse = detail::validation_mse_mlp(ann, val_raw);
        out << "network validation MSE = " << format_double(ann_mse) << '\n';
        out << "linear/network MSE ratio = "
            << format_double(ann_mse > 0 ? val_mse / ann_mse : 0.0) << '\n';
        kv.emplace_back("network_validation_mse", format_double(ann_mse));
        kv.emplace_back("mse_ratio", format_double(ann_mse > 0 ? val_mse / ann_mse : 0.0));
      }
      out << "wrote " << lin_opt.model_out << '\n';
      outcome.report_paths.push_back(lin_opt.model_out);
      if (!lin_opt.summary_out.empty()) {
        detail::write_key_value_file(lin_opt.summary_out, kv);
        outcome.report_paths.push_back(lin_opt.summary_out);
      }
    } else if (predict_cmd->parsed()) {
      const auto model = load_model(predict_opt.model);
      const auto table = detail::load_feature_table(
          predict_opt.data, model.feature_names, predict_opt.reference_nm);
      std::vector<double> preds;
      preds.reserve(table.features.size());
      for (const auto& row : table.features) {
        if (model.kind == ModelKind::mlp)
          preds.push_back(forward_deterministic(model.params, model.specs,
                                                standardize_row(row, model.stats))[0]);
        else
          preds.push_back(predict_linear(model.linear, row));
      }
      std::vector<double> pred_with_truth, truth_present;
      for (std::size_t i = 0; i < preds.size(); ++i)
        if (!std::isnan(table.truths[i])) {
          pred_with_truth.push_back(preds[i]);
          truth_present.push_back(table.truths[i]);
        }
      if (!predict_opt.out.empty()) {
        std::ofstream f(predict_opt.out, std::ios::binary);
        if (!f) throw DataError(predict_opt.out + ": cannot write");
        f << "index,predicted_nm,true_nm\n";
        for (std::size_t i = 0; i < preds.size(); ++i) {
          f << i << ',' << format_double(preds[i]) << ',';
          if (!std::isnan(table.truths[i])) f << format_double(table.truths[i]);
          f << '\n';
        }
        out << "wrote " << predict_opt.out << " (" << preds.size() << " rows)\n";
        outcome.report_paths.push_back(predict_opt.out);
      } else {
        for (std::size_t i = 0; i < preds.size(); ++i)
          out << i << ": " << format_double(preds[i]) << '\n';
      }
      if (!truth_present.empty())
        out << "MSE over " << truth_present.size()
            << " rows with truth = " << format_double(mse(pred_with_truth, truth_present))
            << '\n';
    } else if (bnn_cmd->parsed()) {
      const auto model = load_model(bnn_opt.model);
      if (model.kind != ModelKind::mlp)
        throw DataError(bnn_opt.model + ": bnn-predict needs a network model");
      const auto table = detail::load_feature_table(bnn_opt.data, model.feature_names,
                                                    bnn_opt.reference_nm);
      const std::uint64_t mc_base = derive_seed(bnn_opt.seed, "mc");
      std::vector<PredictionReportRow> rows;
      std::vector<PredictiveDistribution> dists;
      rows.reserve(table.features.size());
      for (std::size_t i = 0; i < table.features.size(); ++i) {
        Rng sample_rng(derive_seed(mc_base, i));
        const auto x = standardize_row(table.features[i], model.stats);
        const auto dist =
            mc_dropout_predict(model.params, model.specs, x, bnn_opt.passes, sample_rng);
        dists.push_back(dist);
        PredictionReportRow row;
        row.index = i;
        row.mean_nm = dist.mean;
        row.std_nm = dist.std_dev;
        if (!std::isnan(table.truths[i])) {
          row.true_nm = table.truths[i];
          row.abs_error_nm = std::fabs(table.truths[i] - dist.mean);
          row.band = band_label(classify_band(dist.mean, dist.std_dev, table.truths[i]));
        }
        rows.push_back(row);
      }
      save_prediction_report(bnn_opt.out, rows);
      out << "wrote " << bnn_opt.out << " (" << rows.size() << " rows, "
          << bnn_opt.passes << " passes)\n";
      outcome.report_paths.push_back(bnn_opt.out);
      const bool all_truths = std::all_of(rows.begin(), rows.end(),
                                          [](const auto& r) { return r.true_nm.has_value(); });
      if (all_truths && !rows.empty()) {
        std::vector<double> truths;
        for (const auto& r : rows) truths.push_back(*r.true_nm);
        for (const auto& line : detail::coverage_lines(coverage(dists, truths)))
          out << line << '\n';
      }
    } else if (coverage_cmd->parsed()) {
      const auto rows = load_prediction_report(cov_opt.report);
      if (rows.empty()) throw DataError(cov_opt.report + ": no rows");
      std::vector<PredictiveDistribution> dists;
      std::vector<double> truths;
      for (const auto& r : rows) {
        if (!r.true_nm)
          throw DataError(cov_opt.report + ": row " + std::to_string(r.index) +
                          " has no true_nm; coverage needs truths");
        dists.push_back({r.mean_nm, r.std_nm, 0});
        truths.push_back(*r.true_nm);
      }
      for (const auto& line : detail::coverage_lines(coverage(dists, truths)))
        out << line << '\n';
    } else if (extract_cmd->parsed()) {
      const auto img = read_ppm(extract_opt.image);
      const Rect rect{extract_opt.rect[0], extract_opt.rect[1], extract_opt.rect[2],
                      extract_opt.rect[3]};
      const auto rgb = mean_rgb(img, rect);
      const std::filesystem::path out_path = extract_opt.out;
      const bool exists = std::filesystem::exists(out_path);
      if (exists) {
        std::ifstream check(out_path);
        std::string header;
        std::getline(check, header);
        if (std::string(trim(header)) != kRgbCsvHeader)
          throw DataError(out_path.string() + ": existing file is not an RGB CSV");
      }
      std::ofstream f(out_path, std::ios::binary | std::ios::app);
      if (!f) throw DataError(out_path.string() + ": cannot write");
      if (!exists) f << kRgbCsvHeader << '\n';
      f << format_double(rgb[0]) << ',' << format_double(rgb[1]) << ','
        << format_double(rgb[2]) << ',';
      if (!std::isnan(extract_opt.depth_nm)) f << format_double(extract_opt.depth_nm);
      f << '\n';
      f.close();
      out << "r = " << format_double(rgb[0]) << ", g = " << format_double(rgb[1])
          << ", b = " << format_double(rgb[2]) << '\n';
      out << "appended to " << out_path.string() << '\n';
      outcome.report_paths.push_back(out_path.string());
    } else if (evaluate_cmd->parsed()) {
      const std::filesystem::path out_dir = eval_opt.out_dir;
      const auto so = detail::run_synth_phase(out_dir, eval_opt.seed,
                                              eval_opt.noise_nm,
                                              eval_opt.reference_nm);
      outcome.report_paths = so.paths;

      TrainConfig base_config = eval_opt.config.empty()
                                    ? TrainConfig{}
                                    : load_train_config(eval_opt.config);
      if (eval_opt.epochs >= 0) base_config.epochs = static_cast<std::size_t>(eval_opt.epochs);
      if (eval_opt.learning_rate > 0) base_config.learning_rate = eval_opt.learning_rate;
      if (eval_opt.weight_decay >= 0) base_config.weight_decay = eval_opt.weight_decay;

      std::vector<std::string> summary;
      std::vector<std::pair<std::string, std::string>> kv;
      kv.emplace_back("command", "evaluate");
      kv.emplace_back("seed", std::to_string(eval_opt.seed));

      struct ScenarioResult {
        double ann_mse = 0.0;
        double linear_mse = 0.0;
      };
      auto run_scenario = [&](const std::string& name, const Dataset& ds,
                              const std::string& train_role) {
        const auto split =
            split_random(ds.size(), 7, derive_seed(eval_opt.seed, "split"));
        const Dataset train_raw = select_rows(ds, split.train);
        const Dataset val_raw = select_rows(ds, split.validation);
        const auto stats = fit_standardization(train_raw);
        TrainConfig config = base_config;
        config.seed = derive_seed(eval_opt.seed, train_role);
        const auto specs = paper_architecture(ds.dim());
        const auto result = train(specs, apply_standardization(train_raw, stats), config);
        const auto model_path = out_dir / ("model_ann_" + name + ".txt");
        save_mlp_model(model_path, specs, result.params, stats, ds.feature_names,
                       config.seed);
        outcome.report_paths.push_back(model_path.string());
        std::vector<double> preds;
        for (const auto& row : val_raw.features)
          preds.push_back(
              forward_deterministic(result.params, specs, standardize_row(row, stats))[0]);
        ScenarioResult sr;
        sr.ann_mse = mse(preds, val_raw.targets);
        const auto lin = fit_linear(train_raw, true);
        const auto lin_path = out_dir / ("model_linear_" + name + ".txt");
        save_linear_model(lin_path, lin, ds.feature_names);
        outcome.report_paths.push_back(lin_path.string());
        sr.linear_mse = mse(predict_linear(lin, val_raw), val_raw.targets);
        summary.push_back("scenario " + name + " (mean-depth, " +
                          std::to_string(ds.size()) + " rows, " +
                          std::to_string(train_raw.size()) + "/" +
                          std::to_string(val_raw.size()) + " split)");
        summary.push_back("  network validation MSE = " + format_double(sr.ann_mse));
        summary.push_back("  linear validation MSE  = " + format_double(sr.linear_mse));
        summary.push_back("  linear/network ratio   = " +
                          format_double(sr.ann_mse > 0 ? sr.linear_mse / sr.ann_mse : 0.0));
        kv.emplace_back(name + ".ann_validation_mse", format_double(sr.ann_mse));
        kv.emplace_back(name + ".linear_validation_mse", format_double(sr.linear_mse));
        kv.emplace_back(name + ".mse_ratio",
                        format_double(sr.ann_mse > 0 ? sr.linear_mse / sr.ann_mse : 0.0));
        return sr;
      };
      run_scenario("process", make_mean_depth_dataset(so.records, eval_opt.reference_nm),
                   "train-process");
      run_scenario("rgb", make_rgb_dataset(so.rgb_mean), "train-rgb");

      auto run_bnn = [&](const std::string& name, const Dataset& ds,
                         const std::string& train_role, const std::string& mc_role) {
        const auto split = split_random(
            ds.size(), 152, derive_seed(eval_opt.seed, "split-per-point"));
        const Dataset train_raw = select_rows(ds, split.train);
        const Dataset val_raw = select_rows(ds, split.validation);
        const auto stats = fit_standardization(train_raw);
        TrainConfig config = base_config;
        config.seed = derive_seed(eval_opt.seed, train_role);
        const auto specs = paper_architecture(ds.dim());
        const auto result = train(specs, apply_standardization(train_raw, stats), config);
        const std::uint64_t mc_base = derive_seed(eval_opt.seed, mc_role);
        std::vector<PredictionReportRow> rows;
        std::vector<PredictiveDistribution> dists;
        for (std::size_t i = 0; i < val_raw.size(); ++i) {
          Rng sample_rng(derive_seed(mc_base, i));
          const auto dist = mc_dropout_predict(
              result.params, specs, standardize_row(val_raw.features[i], stats),
              eval_opt.passes, sample_rng);
          dists.push_back(dist);
          PredictionReportRow row;
          row.index = i;
          row.mean_nm = dist.mean;
          row.std_nm = dist.std_dev;
          row.true_nm = val_raw.targets[i];
          row.abs_error_nm = std::fabs(val_raw.targets[i] - dist.mean);
          row.band = band_label(classify_band(dist.mean, dist.std_dev, val_raw.targets[i]));
          rows.push_back(row);
        }
        const auto report_path = out_dir / ("bnn_" + name + "_report.csv");
        save_prediction_report(report_path, rows);
        outcome.report_paths.push_back(report_path.string());
        const auto rep = coverage(dists, val_raw.targets);
        summary.push_back("bnn " + name + " (per-point, " + std::to_string(ds.size()) +
                          " rows, " + std::to_string(train_raw.size()) + "/" +
                          std::to_string(val_raw.size()) + " split, " +
                          std::to_string(eval_opt.passes) + " passes)");
        for (const auto& line : detail::coverage_lines(rep))
          summary.push_back("  " + line);
        kv.emplace_back("bnn_" + name + ".frac_within_1sigma",
                        format_double(rep.frac_within_1sigma));
        kv.emplace_back("bnn_" + name + ".frac_within_2sigma_only",
                        format_double(rep.frac_within_2sigma_only));
        kv.emplace_back("bnn_" + name + ".frac_outside", format_double(rep.frac_outside));
      };
      run_bnn("process", make_per_point_dataset(so.records, eval_opt.reference_nm),
              "bnn-process", "mc-process");
      run_bnn("rgb", make_rgb_dataset(so.rgb_per_point), "bnn-rgb", "mc-rgb");

      const auto summary_path = eval_opt.summary_out.empty()
                                    ? (out_dir / "summary.txt")
                                    : std::filesystem::path(eval_opt.summary_out);
      {
        std::ofstream f(summary_path, std::ios::binary);
        if (!f) throw DataError(summary_path.string() + ": cannot write");
        for (const auto& line : summary) f << line << '\n';
      }
      const auto kv_path = out_dir / "summary_kv.txt";
      detail::write_key_value_file(kv_path, kv);
      outcome.report_paths.push_back(summary_path.string());
      outcome.report_paths.push_back(kv_path.string());
      for (const auto& line : summary) out << line << '\n';
      out << "wrote " << summary_path.string() << '\n';
    }
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    outcome.exit_code = 0;
    return outcome;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    outcome.exit_code = 0;
    return outcome;
  } catch (const CLI::ParseError& e) {
    detail::print_error(err, "usage", e.what());
    outcome.exit_code = 1;
    return outcome;
  } catch (const DataError& e) {
    detail::print_error(err, "data", e.what());
    outcome.exit_code = 2;
    return outcome;
  } catch (const NumericError& e) {
    detail::print_error(err, "numeric", e.what());
    outcome.exit_code = 3;
    return outcome;
  } catch (const std::filesystem::filesystem_error& e) {
    detail::print_error(err, "data", e.what());
    outcome.exit_code = 2;
    return outcome;
  } catch (const std::invalid_argument& e) {
    detail::print_error(err, "usage", e.what());
    outcome.exit_code = 1;
    return outcome;
  }
  return outcome;
}

}  // namespace cli
}  // namespace etchvm
