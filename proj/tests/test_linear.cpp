#include <gtest/gtest.h>

#include <cmath>
#include <vector>

#include <etchvm/linear_model.hpp>
#include <etchvm/rng.hpp>

using namespace etchvm;

namespace {

Dataset affine_dataset(const std::vector<double>& w, double b, std::size_t n,
                       std::uint64_t seed) {
  Rng rng(seed);
  Dataset ds;
  ds.feature_names.resize(w.size(), "f");
  for (std::size_t i = 0; i < n; ++i) {
    std::vector<double> row(w.size());
    for (auto& v : row) v = 20.0 * (uniform01(rng) - 0.5);
    double y = b;
    for (std::size_t j = 0; j < w.size(); ++j) y += w[j] * row[j];
    ds.features.push_back(row);
    ds.targets.push_back(y);
  }
  return ds;
}

}  // namespace

TEST(LinearFit, TwoPointLineExact) {
  Dataset ds;
  ds.feature_names = {"x"};
  ds.features = {{0.0}, {1.0}};
  ds.targets = {1.0, 3.0};
  const auto model = fit_linear(ds, true);
  EXPECT_NEAR(model.weights[0], 2.0, 1e-8);
  EXPECT_NEAR(model.bias, 1.0, 1e-8);
  EXPECT_NEAR(predict_linear(model, {0.5}), 2.0, 1e-8);
}

TEST(LinearFit, RecoversAffineModel) {
  const std::vector<double> w{1.5, -2.0, 0.5};
  const auto ds = affine_dataset(w, 3.0, 30, 4);
  const auto model = fit_linear(ds, true);
  ASSERT_TRUE(model.with_bias);
  for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(model.weights[j], w[j], 1e-6);
  EXPECT_NEAR(model.bias, 3.0, 1e-6);
}

TEST(LinearFit, NoBiasVariantPinsOrigin) {
  const std::vector<double> w{2.5, -1.0};
  const auto ds = affine_dataset(w, 0.0, 20, 6);
  const auto model = fit_linear(ds, false);
  EXPECT_FALSE(model.with_bias);
  EXPECT_EQ(model.bias, 0.0);
  for (std::size_t j = 0; j < w.size(); ++j) EXPECT_NEAR(model.weights[j], w[j], 1e-6);
}

TEST(LinearFit, ResidualOrthogonalToDesign) {
  auto ds = affine_dataset({1.0, -1.0, 2.0}, -4.0, 40, 8);
  Rng rng(9);
  double norm_y = 0.0;
  for (auto& y : ds.targets) y += normal01(rng);
  for (double y : ds.targets) norm_y += y * y;
  norm_y = std::sqrt(norm_y);
  const auto model = fit_linear(ds, true);
  const auto preds = predict_linear(model, ds);
  for (std::size_t j = 0; j < ds.dim(); ++j) {
    double dot = 0.0;
    for (std::size_t i = 0; i < ds.size(); ++i)
      dot += (ds.targets[i] - preds[i]) * ds.features[i][j];
    EXPECT_LE(std::fabs(dot), 1e-6 * norm_y);
  }
}

TEST(LinearFit, DuplicatedColumnHandledByJitter) {
  Dataset ds;
  ds.feature_names = {"a", "a_copy"};
  Rng rng(3);
  for (std::size_t i = 0; i < 12; ++i) {
    const double v = 10.0 * (uniform01(rng) - 0.5);
    ds.features.push_back({v, v});
    ds.targets.push_back(3.0 * v + 1.0);
  }
  const auto model = fit_linear(ds, true);
  const auto preds = predict_linear(model, ds);
  for (std::size_t i = 0; i < ds.size(); ++i)
    EXPECT_NEAR(preds[i], ds.targets[i], 1e-4);
}

TEST(LinearFit, NeedsEnoughRows) {
  Dataset ds;
  ds.feature_names = {"a", "b", "c"};
  ds.features = {{1.0, 2.0, 3.0}, {2.0, 1.0, 0.0}};
  ds.targets = {1.0, 2.0};
  EXPECT_THROW(fit_linear(ds, true), DataError);
  EXPECT_THROW(fit_linear(Dataset{}, true), DataError);
}

TEST(LinearPredict, DimensionMismatchThrows) {
  const auto ds = affine_dataset({1.0, 2.0}, 0.5, 10, 5);
  const auto model = fit_linear(ds, true);
  EXPECT_THROW(predict_linear(model, {1.0}), DataError);
  EXPECT_THROW(predict_linear(model, {1.0, 2.0, 3.0}), DataError);
}

TEST(LinearSolver, ZeroColumnYieldsZeroWeight) {
  Dataset ds;
  ds.feature_names = {"x"};
  ds.features = {{0.0}, {0.0}, {0.0}};
  ds.targets = {1.0, 2.0, 3.0};
  const auto model = fit_linear(ds, false);
  EXPECT_NEAR(model.weights[0], 0.0, 1e-3);
}
