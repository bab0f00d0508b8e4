#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <string>
#include <vector>

#include "errors.hpp"
#include "rng.hpp"

namespace etchvm {

inline constexpr double kReferenceThicknessNm = 302.98;
inline constexpr std::size_t kThicknessPoints = 9;

// One point on the process grid: chamber pressure (mTorr), CF4 flow (sccm),
// top RF power (W).
struct ProcessCondition {
  double pressure = 0.0;
  double cf4_flow = 0.0;
  double rf_top_power = 0.0;
};

inline void validate(const ProcessCondition& c, const std::string& where = "condition") {
  if (!(c.pressure > 0.0) || !(c.cf4_flow > 0.0) || !(c.rf_top_power > 0.0))
    throw DataError(where + ": process condition fields must be positive");
}

// A process condition plus the nine post-etch thickness measurements.
struct WaferRecord {
  ProcessCondition condition;
  std::array<double, kThicknessPoints> thickness_nm{};
};

inline void validate(const WaferRecord& rec, const std::string& where = "record") {
  validate(rec.condition, where);
  for (double t : rec.thickness_nm)
    if (!(t > 0.0) || !(t < 400.0))
      throw DataError(where + ": thickness out of (0, 400) nm: " + std::to_string(t));
}

struct RgbSample {
  double r = 0.0;
  double g = 0.0;
  double b = 0.0;
  double depth_nm = 0.0;
};

inline void validate(const RgbSample& s, const std::string& where = "rgb sample") {
  for (double c : {s.r, s.g, s.b})
    if (!(c >= 0.0) || !(c <= 255.0))
      throw DataError(where + ": RGB value out of [0, 255]: " + std::to_string(c));
}

// N feature rows with N scalar targets.
struct Dataset {
  std::vector<std::vector<double>> features;
  std::vector<double> targets;
  std::vector<std::string> feature_names;

  std::size_t size() const { return features.size(); }
  std::size_t dim() const { return features.empty() ? 0 : features.front().size(); }
};

inline void validate(const Dataset& ds, const std::string& where = "dataset") {
  if (ds.features.size() != ds.targets.size())
    throw DataError(where + ": feature row count != target count");
  for (const auto& row : ds.features)
    if (row.size() != ds.dim())
      throw DataError(where + ": ragged feature rows");
}

struct StandardizationStats {
  std::vector<double> mean;
  std::vector<double> std_dev;
};

struct SplitIndices {
  std::vector<std::size_t> train;
  std::vector<std::size_t> validation;
};

inline double etch_depth(const WaferRecord& rec,
                         double reference_nm = kReferenceThicknessNm) {
  double sum = std::accumulate(rec.thickness_nm.begin(), rec.thickness_nm.end(), 0.0);
  return sum / static_cast<double>(kThicknessPoints) - reference_nm;
}

// Uniform sample without replacement via partial Fisher-Yates: the first
// n_validation draws become the validation set. Both halves sorted ascending.
inline SplitIndices split_random(std::size_t n, std::size_t n_validation,
                                 std::uint64_t seed) {
  if (n_validation == 0 || n_validation >= n)
    throw DataError("split: need 0 < n_validation < n, got " +
                    std::to_string(n_validation) + " of " + std::to_string(n));
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  Rng rng(seed);
  for (std::size_t i = 0; i < n_validation; ++i) {
    std::size_t j = i + static_cast<std::size_t>(bounded_uint(rng, n - i));
    std::swap(idx[i], idx[j]);
  }
  SplitIndices out;
  out.validation.assign(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(n_validation));
  out.train.assign(idx.begin() + static_cast<std::ptrdiff_t>(n_validation), idx.end());
  std::sort(out.validation.begin(), out.validation.end());
  std::sort(out.train.begin(), out.train.end());
  return out;
}

// Per-column mean and population (1/N) standard deviation.
inline StandardizationStats fit_standardization(const Dataset& ds) {
  if (ds.size() == 0) throw DataError("standardize: empty dataset");
  const std::size_t d = ds.dim();
  StandardizationStats st;
  st.mean.assign(d, 0.0);
  st.std_dev.assign(d, 0.0);
  for (const auto& row : ds.features)
    for (std::size_t j = 0; j < d; ++j) st.mean[j] += row[j];
  for (std::size_t j = 0; j < d; ++j) st.mean[j] /= static_cast<double>(ds.size());
  for (const auto& row : ds.features)
    for (std::size_t j = 0; j < d; ++j) {
      const double dev = row[j] - st.mean[j];
      st.std_dev[j] += dev * dev;
    }
  for (std::size_t j = 0; j < d; ++j) {
    st.std_dev[j] = std::sqrt(st.std_dev[j] / static_cast<double>(ds.size()));
    if (st.std_dev[j] <= 1e-12)
      throw DataError("standardize: zero-variance column '" +
                      (j < ds.feature_names.size() ? ds.feature_names[j]
                                                   : std::to_string(j)) + "'");
  }
  return st;
}

inline Dataset apply_standardization(const Dataset& ds,
                                     const StandardizationStats& st) {
  if (ds.dim() != st.mean.size() || st.mean.size() != st.std_dev.size())
    throw DataError("standardize: stats dimension mismatch");
  Dataset out = ds;
  for (auto& row : out.features)
    for (std::size_t j = 0; j < row.size(); ++j)
      row[j] = (row[j] - st.mean[j]) / st.std_dev[j];
  return out;
}

inline std::vector<double> standardize_row(const std::vector<double>& x,
                                           const StandardizationStats& st) {
  if (x.size() != st.mean.size())
    throw DataError("standardize: stats dimension mismatch");
  std::vector<double> out(x.size());
  for (std::size_t j = 0; j < x.size(); ++j)
    out[j] = (x[j] - st.mean[j]) / st.std_dev[j];
  return out;
}

inline const std::vector<std::string>& process_feature_names() {
  static const std::vector<std::string> names{"pressure_mtorr", "cf4_sccm", "rf_top_w"};
  return names;
}

inline const std::vector<std::string>& rgb_feature_names() {
  static const std::vector<std::string> names{"r", "g", "b"};
  return names;
}

// Mean-depth construction: one row per wafer, target = mean etch depth.
inline Dataset make_mean_depth_dataset(const std::vector<WaferRecord>& recs,
                                       double reference_nm = kReferenceThicknessNm) {
  Dataset ds;
  ds.feature_names = process_feature_names();
  ds.features.reserve(recs.size());
  ds.targets.reserve(recs.size());
  for (const auto& rec : recs) {
    ds.features.push_back({rec.condition.pressure, rec.condition.cf4_flow,
                           rec.condition.rf_top_power});
    ds.targets.push_back(etch_depth(rec, reference_nm));
  }
  return ds;
}

// Per-point construction: each of the nine thickness measurements becomes its
// own sample (features repeated, target = thickness_i - reference).
inline Dataset make_per_point_dataset(const std::vector<WaferRecord>& recs,
                                      double reference_nm = kReferenceThicknessNm) {
  Dataset ds;
  ds.feature_names = process_feature_names();
  ds.features.reserve(recs.size() * kThicknessPoints);
  ds.targets.reserve(recs.size() * kThicknessPoints);
  for (const auto& rec : recs)
    for (double t : rec.thickness_nm) {
      ds.features.push_back({rec.condition.pressure, rec.condition.cf4_flow,
                             rec.condition.rf_top_power});
      ds.targets.push_back(t - reference_nm);
    }
  return ds;
}

inline Dataset make_rgb_dataset(const std::vector<RgbSample>& samples) {
  Dataset ds;
  ds.feature_names = rgb_feature_names();
  ds.features.reserve(samples.size());
  ds.targets.reserve(samples.size());
  for (const auto& s : samples) {
    ds.features.push_back({s.r, s.g, s.b});
    ds.targets.push_back(s.depth_nm);
  }
  return ds;
}

inline Dataset select_rows(const Dataset& ds, const std::vector<std::size_t>& rows) {
  Dataset out;
  out.feature_names = ds.feature_names;
  out.features.reserve(rows.size());
  out.targets.reserve(rows.size());
  for (std::size_t i : rows) {
    if (i >= ds.size())
      throw DataError("select_rows: index " + std::to_string(i) +
                      " out of range for " + std::to_string(ds.size()) + " rows");
    out.features.push_back(ds.features[i]);
    out.targets.push_back(ds.targets[i]);
  }
  return out;
}

}  // namespace etchvm
