#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <vector>

#include "data_model.hpp"
#include "errors.hpp"
#include "linear_model.hpp"
#include "rng.hpp"

namespace etchvm {

struct DepthAnchor {
  ProcessCondition condition;
  double depth_nm = 0.0;
};

// Published anchor measurements the synthetic world is calibrated to: seven
// (pressure, CF4 flow, power) conditions with true etch depths, plus the
// model predictions reported alongside them (kept as regression references,
// not refitted here).
inline const std::vector<DepthAnchor>& depth_anchors() {
  static const std::vector<DepthAnchor> rows{
      {{40, 15, 80}, -53.70}, {{20, 5, 50}, -36.80}, {{40, 5, 70}, -48.40},
      {{20, 20, 60}, -47.00}, {{20, 10, 100}, -94.80}, {{40, 15, 50}, -37.60},
      {{20, 10, 80}, -69.10}};
  return rows;
}

inline const std::vector<double>& depth_anchor_ann_predictions() {
  static const std::vector<double> rows{-57.13, -38.00, -48.70, -48.10,
                                        -93.90, -37.02, -66.84};
  return rows;
}

inline const std::vector<double>& depth_anchor_linear_predictions() {
  static const std::vector<double> rows{-56.76, -38.65, -46.17, -49.98,
                                        -84.97, -29.41, -66.73};
  return rows;
}

inline const std::vector<RgbSample>& rgb_anchors() {
  static const std::vector<RgbSample> rows{
      {228.8, 151.2, 216.3, -53.70}, {248.0, 195.3, 217.0, -36.80},
      {234.0, 159.9, 218.9, -48.40}, {236.8, 163.5, 216.6, -47.00},
      {224.2, 225.3, 235.1, -94.80}, {238.3, 180.6, 206.7, -37.60},
      {227.2, 170.1, 228.4, -69.10}};
  return rows;
}

inline const std::vector<double>& rgb_anchor_ann_predictions() {
  static const std::vector<double> rows{-52.38, -42.98, -50.94, -46.90,
                                        -92.33, -37.18, -64.62};
  return rows;
}

inline const std::vector<double>& rgb_anchor_linear_predictions() {
  static const std::vector<double> rows{-50.88, -56.46, -52.54, -51.41,
                                        -83.37, -51.32, -62.69};
  return rows;
}

inline constexpr std::array<double, 3> kGridPressures{20, 30, 40};
inline constexpr std::array<double, 4> kGridFlows{5, 10, 15, 20};
inline constexpr std::array<double, 7> kGridPowers{50, 60, 70, 80, 90, 100, 110};

// The full 3 x 4 x 7 process grid, pressure varying slowest, power fastest.
inline std::vector<ProcessCondition> process_grid() {
  std::vector<ProcessCondition> grid;
  grid.reserve(kGridPressures.size() * kGridFlows.size() * kGridPowers.size());
  for (double p : kGridPressures)
    for (double q : kGridFlows)
      for (double w : kGridPowers) grid.push_back({p, q, w});
  return grid;
}

// Etch-magnitude law E(p, Q, P) = c0 + c1*P + c2/p + c3*ln(Q) + c4*P/p,
// depth = -E. The 1/p and P/p terms carry the mean-free-path pressure
// physics, ln(Q) the F-radical saturation; the P/p cross term is required to
// hold all anchors within the 5 nm calibration bound.
struct DepthOracle {
  std::array<double, 5> coeffs{};
  double fit_residual_max = 0.0;
};

inline constexpr double kDepthFitResidualBound = 5.0;
inline constexpr double kRgbFitResidualBound = 20.0;
// Lower bounds enforced on dE/d(1/p) = c2 + c4*P (per grid power) and on
// dE/dP = c1 + c4/p (per grid pressure) so the fitted law is strictly
// monotone across the grid: deeper etching at higher power, shallower at
// higher pressure.
inline constexpr double kPressureSlopeMargin = 1.0;
inline constexpr double kPowerSlopeMargin = 0.05;

namespace detail {

inline std::array<double, 5> depth_design_row(const ProcessCondition& c) {
  return {1.0, c.rf_top_power, 1.0 / c.pressure, std::log(c.cf4_flow),
          c.rf_top_power / c.pressure};
}

}  // namespace detail

inline double oracle_depth(const DepthOracle& oracle, const ProcessCondition& c) {
  const auto row = detail::depth_design_row(c);
  double e = 0.0;
  for (std::size_t i = 0; i < row.size(); ++i) e += oracle.coeffs[i] * row[i];
  return -e;
}

// Least-squares calibration of the depth law with monotonicity enforcement:
// if the unconstrained fit violates a slope margin at a grid corner, the fit
// is re-solved with that margin as an equality constraint (KKT system),
// activating at most one constraint per violated direction.
inline DepthOracle fit_depth_oracle(const std::vector<DepthAnchor>& anchors) {
  constexpr std::size_t kCoeffs = 5;
  if (anchors.size() < kCoeffs)
    throw DataError("depth oracle: need at least " + std::to_string(kCoeffs) +
                    " anchors, got " + std::to_string(anchors.size()));
  std::set<double> pressures, flows, powers;
  for (const auto& a : anchors) {
    validate(a.condition, "depth oracle anchor");
    pressures.insert(a.condition.pressure);
    flows.insert(a.condition.cf4_flow);
    powers.insert(a.condition.rf_top_power);
  }
  if (pressures.size() < 2 || powers.size() < 2 || flows.size() < 2)
    throw DataError("depth oracle: anchors must span at least 2 pressures, "
                    "2 powers, and 2 flows");

  std::vector<double> ata(kCoeffs * kCoeffs, 0.0);
  std::vector<double> aty(kCoeffs, 0.0);
  for (const auto& a : anchors) {
    const auto row = detail::depth_design_row(a.condition);
    const double e = -a.depth_nm;
    for (std::size_t i = 0; i < kCoeffs; ++i) {
      for (std::size_t j = 0; j < kCoeffs; ++j) ata[i * kCoeffs + j] += row[i] * row[j];
      aty[i] += row[i] * e;
    }
  }

  // Slope constraints evaluated at the extreme grid corners (the slopes are
  // linear in P and in 1/p, so corners bound the whole grid).
  struct SlopeConstraint {
    std::array<double, 5> direction;
    double margin;
  };
  const std::vector<SlopeConstraint> corners{
      {{0, 0, 1, 0, kGridPowers.front()}, kPressureSlopeMargin},
      {{0, 0, 1, 0, kGridPowers.back()}, kPressureSlopeMargin},
      {{0, 1, 0, 0, 1.0 / kGridPressures.front()}, kPowerSlopeMargin},
      {{0, 1, 0, 0, 1.0 / kGridPressures.back()}, kPowerSlopeMargin}};

  auto slope_value = [&](const std::array<double, 5>& c, std::size_t k) {
    double v = 0.0;
    for (std::size_t i = 0; i < kCoeffs; ++i) v += corners[k].direction[i] * c[i];
    return v - corners[k].margin;
  };

  auto solve_with_active = [&](const std::vector<std::size_t>& active) {
    const std::size_t n = kCoeffs + active.size();
    std::vector<double> kkt(n * n, 0.0);
    std::vector<double> rhs(n, 0.0);
    for (std::size_t i = 0; i < kCoeffs; ++i) {
      for (std::size_t j = 0; j < kCoeffs; ++j) kkt[i * n + j] = ata[i * kCoeffs + j];
      rhs[i] = aty[i];
    }
    for (std::size_t a = 0; a < active.size(); ++a) {
      const auto& con = corners[active[a]];
      for (std::size_t i = 0; i < kCoeffs; ++i) {
        kkt[i * n + (kCoeffs + a)] = con.direction[i];
        kkt[(kCoeffs + a) * n + i] = con.direction[i];
      }
      rhs[kCoeffs + a] = con.margin;
    }
    const auto sol = detail::solve_dense(std::move(kkt), std::move(rhs));
    std::array<double, 5> c{};
    std::copy_n(sol.begin(), kCoeffs, c.begin());
    return c;
  };

  std::vector<std::size_t> active;
  std::array<double, 5> coeffs = solve_with_active(active);
  for (std::size_t round = 0; round < corners.size(); ++round) {
    std::size_t worst = corners.size();
    double worst_gap = -1e-12;
    for (std::size_t k = 0; k < corners.size(); ++k) {
      if (std::find(active.begin(), active.end(), k) != active.end()) continue;
      const double gap = slope_value(coeffs, k);
      if (gap < worst_gap) {
        worst_gap = gap;
        worst = k;
      }
    }
    if (worst == corners.size()) break;
    active.push_back(worst);
    coeffs = solve_with_active(active);
  }
  for (std::size_t k = 0; k < corners.size(); ++k)
    if (slope_value(coeffs, k) < -1e-9)
      throw NumericError("depth oracle: grid monotonicity unsatisfiable for "
                         "these anchors");

  DepthOracle oracle;
  oracle.coeffs = coeffs;
  for (const auto& a : anchors)
    oracle.fit_residual_max = std::max(
        oracle.fit_residual_max, std::fabs(oracle_depth(oracle, a.condition) - a.depth_nm));
  if (oracle.fit_residual_max > kDepthFitResidualBound)
    throw NumericError("depth oracle: calibration residual " +
                       std::to_string(oracle.fit_residual_max) + " nm exceeds " +
                       std::to_string(kDepthFitResidualBound) + " nm");
  return oracle;
}

// Per-channel maps depth -> channel value: a fitted quadratic plus a fixed
// interference-style ripple. The ripple keeps the RGB -> depth relation
// genuinely nonlinear (three pure quadratics of one variable can be inverted
// by a linear combination, which would let an affine model match the
// network); its constants are part of the oracle definition, not fitted.
struct RgbOracle {
  std::array<std::array<double, 3>, 3> quad{};  // per channel: c0 + c1 d + c2 d^2
  double fit_residual_max = 0.0;
};

inline constexpr std::array<double, 3> kRgbRippleAmplitude{6.0, 8.0, 7.0};
inline constexpr std::array<double, 3> kRgbRipplePeriodNm{52.0, 44.0, 38.0};
inline constexpr std::array<double, 3> kRgbRipplePhase{0.7, 2.1, 4.0};

namespace detail {

inline double rgb_ripple(std::size_t channel, double depth_nm) {
  const double two_pi = 6.283185307179586476925286766559;
  return kRgbRippleAmplitude[channel] *
         std::sin(two_pi * (-depth_nm) / kRgbRipplePeriodNm[channel] +
                  kRgbRipplePhase[channel]);
}

}  // namespace detail

inline std::array<double, 3> oracle_rgb(const RgbOracle& oracle, double depth_nm) {
  std::array<double, 3> out{};
  for (std::size_t ch = 0; ch < 3; ++ch) {
    const auto& q = oracle.quad[ch];
    const double v = q[0] + q[1] * depth_nm + q[2] * depth_nm * depth_nm +
                     detail::rgb_ripple(ch, depth_nm);
    out[ch] = std::clamp(v, 0.0, 255.0);
  }
  return out;
}

inline RgbOracle fit_rgb_oracle(const std::vector<RgbSample>& anchors) {
  if (anchors.size() < 4)
    throw DataError("rgb oracle: need at least 4 anchors, got " +
                    std::to_string(anchors.size()));
  std::set<double> depths;
  for (const auto& a : anchors) {
    validate(a, "rgb oracle anchor");
    depths.insert(a.depth_nm);
  }
  if (depths.size() < 3)
    throw DataError("rgb oracle: anchors must span at least 3 distinct depths");

  RgbOracle oracle;
  for (std::size_t ch = 0; ch < 3; ++ch) {
    std::vector<double> ata(9, 0.0);
    std::vector<double> aty(3, 0.0);
    for (const auto& a : anchors) {
      const std::array<double, 3> row{1.0, a.depth_nm, a.depth_nm * a.depth_nm};
      const double v = (ch == 0) ? a.r : (ch == 1) ? a.g : a.b;
      for (std::size_t i = 0; i < 3; ++i) {
        for (std::size_t j = 0; j < 3; ++j) ata[i * 3 + j] += row[i] * row[j];
        aty[i] += row[i] * v;
      }
    }
    const auto sol = detail::solve_dense(std::move(ata), std::move(aty));
    std::copy_n(sol.begin(), 3, oracle.quad[ch].begin());
  }
  for (const auto& a : anchors) {
    const auto rgb = oracle_rgb(oracle, a.depth_nm);
    oracle.fit_residual_max = std::max(
        {oracle.fit_residual_max, std::fabs(rgb[0] - a.r), std::fabs(rgb[1] - a.g),
         std::fabs(rgb[2] - a.b)});
  }
  if (oracle.fit_residual_max > kRgbFitResidualBound)
    throw NumericError("rgb oracle: calibration residual " +
                       std::to_string(oracle.fit_residual_max) + " exceeds " +
                       std::to_string(kRgbFitResidualBound));
  return oracle;
}

// Nine thickness readings per grid point: reference + oracle depth +
// independent Gaussian noise, clamped to the physical (0, 400) nm range.
// Each grid point draws from its own derived substream, so generation is
// reproducible point-by-point regardless of evaluation order.
inline std::vector<WaferRecord> generate_process_dataset(
    const DepthOracle& oracle, const std::vector<ProcessCondition>& grid,
    double noise_std_nm, std::uint64_t seed,
    double reference_nm = kReferenceThicknessNm) {
  if (!(noise_std_nm >= 0.0))
    throw DataError("generate: noise_std_nm must be >= 0");
  std::vector<WaferRecord> recs;
  recs.reserve(grid.size());
  for (std::size_t i = 0; i < grid.size(); ++i) {
    WaferRecord rec;
    rec.condition = grid[i];
    const double base = reference_nm + oracle_depth(oracle, grid[i]);
    Rng rng(derive_seed(seed, i));
    for (auto& t : rec.thickness_nm) {
      const double noisy = base + noise_std_nm * normal01(rng);
      t = std::clamp(noisy, 1e-9, 400.0 - 1e-9);
    }
    recs.push_back(rec);
  }
  return recs;
}

// One RGB sample per wafer: channels evaluated at the wafer's mean depth.
inline std::vector<RgbSample> generate_rgb_samples(
    const RgbOracle& oracle, const std::vector<WaferRecord>& recs,
    double reference_nm = kReferenceThicknessNm) {
  std::vector<RgbSample> out;
  out.reserve(recs.size());
  for (const auto& rec : recs) {
    const double d = etch_depth(rec, reference_nm);
    const auto rgb = oracle_rgb(oracle, d);
    out.push_back({rgb[0], rgb[1], rgb[2], d});
  }
  return out;
}

// Per-point RGB samples: the wafer's single color is repeated against each
// of its nine individual depth targets (one photograph, nine measurements).
inline std::vector<RgbSample> generate_rgb_per_point_samples(
    const RgbOracle& oracle, const std::vector<WaferRecord>& recs,
    double reference_nm = kReferenceThicknessNm) {
  std::vector<RgbSample> out;
  out.reserve(recs.size() * kThicknessPoints);
  for (const auto& rec : recs) {
    const double d = etch_depth(rec, reference_nm);
    const auto rgb = oracle_rgb(oracle, d);
    for (double t : rec.thickness_nm)
      out.push_back({rgb[0], rgb[1], rgb[2], t - reference_nm});
  }
  return out;
}

}  // namespace etchvm
