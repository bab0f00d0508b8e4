#pragma once

#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "data_model.hpp"
#include "errors.hpp"

namespace etchvm {

namespace detail {

// Gaussian elimination with partial pivoting; A is n x n row-major.
inline std::vector<double> solve_dense(std::vector<double> a, std::vector<double> b) {
  const std::size_t n = b.size();
  for (std::size_t col = 0; col < n; ++col) {
    std::size_t pivot = col;
    double best = std::fabs(a[col * n + col]);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::fabs(a[r * n + col]);
      if (v > best) {
        best = v;
        pivot = r;
      }
    }
    if (!(best > 0.0) || !std::isfinite(best))
      throw NumericError("solve: singular system at column " + std::to_string(col));
    if (pivot != col) {
      for (std::size_t k = col; k < n; ++k)
        std::swap(a[pivot * n + k], a[col * n + k]);
      std::swap(b[pivot], b[col]);
    }
    const double diag = a[col * n + col];
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = a[r * n + col] / diag;
      if (f == 0.0) continue;
      for (std::size_t k = col; k < n; ++k) a[r * n + k] -= f * a[col * n + k];
      b[r] -= f * b[col];
    }
  }
  std::vector<double> x(n);
  for (std::size_t ri = n; ri-- > 0;) {
    double s = b[ri];
    for (std::size_t k = ri + 1; k < n; ++k) s -= a[ri * n + k] * x[k];
    x[ri] = s / a[ri * n + ri];
  }
  for (double v : x)
    if (!std::isfinite(v)) throw NumericError("solve: non-finite solution");
  return x;
}

}  // namespace detail

struct LinearModel {
  std::vector<double> weights;
  double bias = 0.0;
  bool with_bias = true;
};

// Least squares via normal equations with a 1e-10 ridge jitter on the
// diagonal. Fits raw (unstandardized) features.
inline LinearModel fit_linear(const Dataset& data, bool with_bias = true) {
  const std::size_t n = data.size();
  const std::size_t d = data.dim();
  const std::size_t cols = d + (with_bias ? 1 : 0);
  if (n == 0) throw DataError("fit_linear: empty dataset");
  if (n < cols)
    throw DataError("fit_linear: need at least " + std::to_string(cols) +
                    " samples for " + std::to_string(cols) + " coefficients, got " +
                    std::to_string(n));
  std::vector<double> ata(cols * cols, 0.0);
  std::vector<double> aty(cols, 0.0);
  std::vector<double> row(cols, 1.0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = 0; j < d; ++j) row[j] = data.features[i][j];
    for (std::size_t a = 0; a < cols; ++a) {
      for (std::size_t b = 0; b < cols; ++b) ata[a * cols + b] += row[a] * row[b];
      aty[a] += row[a] * data.targets[i];
    }
  }
  for (std::size_t a = 0; a < cols; ++a) ata[a * cols + a] += 1e-10;
  const auto sol = detail::solve_dense(std::move(ata), std::move(aty));
  LinearModel model;
  model.with_bias = with_bias;
  model.weights.assign(sol.begin(), sol.begin() + static_cast<std::ptrdiff_t>(d));
  model.bias = with_bias ? sol[d] : 0.0;
  return model;
}

inline double predict_linear(const LinearModel& model, const std::vector<double>& x) {
  if (x.size() != model.weights.size())
    throw DataError("predict_linear: input size " + std::to_string(x.size()) +
                    " != weight count " + std::to_string(model.weights.size()));
  double y = model.bias;
  for (std::size_t j = 0; j < x.size(); ++j) y += model.weights[j] * x[j];
  return y;
}

inline std::vector<double> predict_linear(const LinearModel& model,
                                          const Dataset& data) {
  std::vector<double> out;
  out.reserve(data.size());
  for (const auto& row : data.features) out.push_back(predict_linear(model, row));
  return out;
}

}  // namespace etchvm
