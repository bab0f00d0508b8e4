#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "errors.hpp"
#include "nn.hpp"
#include "rng.hpp"

namespace etchvm {

struct PredictiveDistribution {
  double mean = 0.0;
  double std_dev = 0.0;
  std::size_t num_samples = 0;
};

enum class Band { within_1sigma, within_2sigma, outside };

inline const char* band_label(Band b) {
  switch (b) {
    case Band::within_1sigma: return "1sigma";
    case Band::within_2sigma: return "2sigma";
    default: return "outside";
  }
}

// Band of |truth - mean| against sigma multiples, inner edges inclusive.
// Zero sigma degenerates to: exact hit is band 1, anything else outside.
inline Band classify_band(double mean, double std_dev, double truth) {
  const double e = std::fabs(truth - mean);
  if (std_dev == 0.0) return e == 0.0 ? Band::within_1sigma : Band::outside;
  if (e <= std_dev) return Band::within_1sigma;
  if (e <= 2.0 * std_dev) return Band::within_2sigma;
  return Band::outside;
}

struct CoverageReport {
  std::size_t count_within_1sigma = 0;
  std::size_t count_within_2sigma_only = 0;
  std::size_t count_outside = 0;
  std::size_t total = 0;
  double frac_within_1sigma = 0.0;
  double frac_within_2sigma_only = 0.0;
  double frac_outside = 0.0;
};

// MC Dropout: num_passes train-mode forward evaluations with independent
// masks; predictive mean and Bessel-corrected sample std of the outputs.
// Each pass draws its masks from a substream derived from the rng, so a
// parallel evaluation ordered by pass index reproduces the sequential result.
inline PredictiveDistribution mc_dropout_predict(const MlpParams& params,
                                                 const std::vector<LayerSpec>& specs,
                                                 const std::vector<double>& x,
                                                 std::size_t num_passes, Rng& rng) {
  if (num_passes < 2)
    throw std::invalid_argument("mc_dropout_predict: need num_passes >= 2");
  const std::uint64_t base = rng();
  double sum = 0.0;
  std::vector<double> outputs(num_passes);
  ForwardCache cache;
  for (std::size_t pass = 0; pass < num_passes; ++pass) {
    Rng pass_rng(derive_seed(base, pass));
    const auto y = forward(params, specs, x, ForwardMode::train, &pass_rng, &cache);
    outputs[pass] = y[0];
    sum += y[0];
  }
  PredictiveDistribution out;
  out.num_samples = num_passes;
  out.mean = sum / static_cast<double>(num_passes);
  double ss = 0.0;
  for (double y : outputs) {
    const double dev = y - out.mean;
    ss += dev * dev;
  }
  const double var = ss / static_cast<double>(num_passes - 1);
  out.std_dev = std::sqrt(var > 0.0 ? var : 0.0);
  return out;
}

inline CoverageReport coverage(const std::vector<PredictiveDistribution>& predictions,
                               const std::vector<double>& truths) {
  if (predictions.size() != truths.size())
    throw std::invalid_argument("coverage: length mismatch");
  if (predictions.empty()) throw std::invalid_argument("coverage: empty input");
  CoverageReport rep;
  rep.total = predictions.size();
  for (std::size_t i = 0; i < predictions.size(); ++i) {
    switch (classify_band(predictions[i].mean, predictions[i].std_dev, truths[i])) {
      case Band::within_1sigma: ++rep.count_within_1sigma; break;
      case Band::within_2sigma: ++rep.count_within_2sigma_only; break;
      case Band::outside: ++rep.count_outside; break;
    }
  }
  const double n = static_cast<double>(rep.total);
  rep.frac_within_1sigma = static_cast<double>(rep.count_within_1sigma) / n;
  rep.frac_within_2sigma_only = static_cast<double>(rep.count_within_2sigma_only) / n;
  rep.frac_outside = static_cast<double>(rep.count_outside) / n;
  return rep;
}

}  // namespace etchvm
