#include <gtest/gtest.h>

#include <cmath>
#include <set>
#include <vector>

#include <etchvm/rng.hpp>

using namespace etchvm;

TEST(Splitmix, DeterministicAndDispersive) {
  EXPECT_EQ(splitmix64(0), splitmix64(0));
  EXPECT_NE(splitmix64(0), splitmix64(1));
  std::set<std::uint64_t> seen;
  for (std::uint64_t i = 0; i < 1000; ++i) seen.insert(splitmix64(i));
  EXPECT_EQ(seen.size(), 1000u);
}

TEST(DeriveSeed, RolesSeparateStreams) {
  const std::uint64_t master = 42;
  const auto a = derive_seed(master, "split");
  const auto b = derive_seed(master, "init");
  const auto c = derive_seed(master, "dropout");
  EXPECT_NE(a, b);
  EXPECT_NE(a, c);
  EXPECT_NE(b, c);
  EXPECT_EQ(a, derive_seed(master, "split"));
  EXPECT_NE(a, derive_seed(master + 1, "split"));
}

TEST(DeriveSeed, IndexSubstreamsDistinct) {
  const std::uint64_t base = derive_seed(7, "noise");
  std::set<std::uint64_t> seen;
  for (std::size_t i = 0; i < 2000; ++i) seen.insert(derive_seed(base, i));
  EXPECT_EQ(seen.size(), 2000u);
  EXPECT_NE(derive_seed(base, std::size_t{0}), base);
}

TEST(Uniform01, RangeAndDeterminism) {
  Rng a(123), b(123);
  for (int i = 0; i < 10000; ++i) {
    const double u = uniform01(a);
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_EQ(u, uniform01(b));
  }
}

TEST(Uniform01, RoughlyUniformMean) {
  Rng rng(99);
  double sum = 0;
  const int n = 100000;
  for (int i = 0; i < n; ++i) sum += uniform01(rng);
  EXPECT_NEAR(sum / n, 0.5, 0.01);
}

TEST(BoundedUint, StaysInRangeCoversAll) {
  Rng rng(5);
  std::set<std::uint64_t> seen;
  for (int i = 0; i < 1000; ++i) {
    const auto v = bounded_uint(rng, 7);
    EXPECT_LT(v, 7u);
    seen.insert(v);
  }
  EXPECT_EQ(seen.size(), 7u);
}

TEST(BoundedUint, SingleValueRange) {
  Rng rng(5);
  for (int i = 0; i < 10; ++i) EXPECT_EQ(bounded_uint(rng, 1), 0u);
}

TEST(Normal01, MomentsCloseToStandard) {
  Rng rng(2024);
  const int n = 200000;
  double sum = 0, sum_sq = 0;
  for (int i = 0; i < n; ++i) {
    const double z = normal01(rng);
    sum += z;
    sum_sq += z * z;
  }
  const double mean = sum / n;
  const double var = sum_sq / n - mean * mean;
  EXPECT_NEAR(mean, 0.0, 0.01);
  EXPECT_NEAR(var, 1.0, 0.02);
}

TEST(Normal01, FiniteAndDeterministic) {
  Rng a(8), b(8);
  for (int i = 0; i < 1000; ++i) {
    const double z = normal01(a);
    EXPECT_TRUE(std::isfinite(z));
    EXPECT_EQ(z, normal01(b));
  }
}
