#include <gtest/gtest.h>

#include <cmath>
#include <numbers>

#include "support/oracles.hpp"

using namespace qg2l;

namespace {

constexpr double kPi = std::numbers::pi;

TEST(Enstrophy, WeightedExamples) {
  auto g = SpectralGrid::create(16, 2 * kPi);
  ModelParams p;
  p.h1 = 2.0;
  p.h2 = 0.5;
  p.s1 = 0.5;
  p.s2 = 2.0;
  LayeredField q(g);
  q[0] = cosine_mode(g, {1, 0}, 1.0);
  q[1] = cosine_mode(g, {0, 2}, 3.0);
  EXPECT_NEAR(weighted_enstrophy(q, p), 2.0 * 2.0 + 0.5 * 18.0, 1e-14);
  EXPECT_NEAR(weighted_grad_enstrophy(q, p), 2.0 * 2.0 * 1.0 + 0.5 * 18.0 * 4.0, 1e-13);
}

TEST(Enstrophy, MatchesPhysicalQuadrature) {
  auto g = SpectralGrid::create(32, 3.0);
  ModelParams p;
  const LayeredField q = oracle::random_layers(g, 19);
  double quad = 0.0;
  for (int j = 0; j < 2; ++j) {
    for (double v : to_physical(q[j])) quad += v * v;
  }
  quad *= g->length() * g->length() / static_cast<double>(g->size());
  EXPECT_NEAR(weighted_enstrophy(q, p), quad, 1e-10 * quad);
}

TEST(ErrorNorm, Examples) {
  auto g = SpectralGrid::create(16, 2 * kPi);
  const LayeredField q = oracle::random_layers(g, 2);
  EXPECT_EQ(error_norm(q, q, 0.5), 0.0);
  LayeredField d(g);
  d[1] = cosine_mode(g, {2, 0}, 3.0);
  // sqrt(2) lambda^{-alpha/2} |d_k|
  EXPECT_NEAR(error_norm(q + d, q, 0.5), std::sqrt(2.0) * std::pow(4.0, -0.25) * 3.0, 1e-13);
  EXPECT_THROW(error_norm(q, q, 0.0), ConfigError);
  EXPECT_THROW(error_norm(q, q, 1.0), ConfigError);
}

TEST(ErrorNorm, IsAMetricDecreasingInAlpha) {
  auto g = SpectralGrid::create(16, 2 * kPi);
  const LayeredField a = oracle::random_layers(g, 1);
  const LayeredField b = oracle::random_layers(g, 2);
  const LayeredField c = oracle::random_layers(g, 3);
  EXPECT_DOUBLE_EQ(error_norm(a, b, 0.3), error_norm(b, a, 0.3));
  EXPECT_LE(error_norm(a, c, 0.3), error_norm(a, b, 0.3) + error_norm(b, c, 0.3));
  EXPECT_GT(error_norm(a, b, 0.2), error_norm(a, b, 0.4));
  EXPECT_GT(error_norm(a, b, 0.4), error_norm(a, b, 0.8));
}

TEST(BalanceResidual, ZeroStateUsesFloor) {
  std::vector<TrajectorySample> s(3);
  for (int i = 0; i < 3; ++i) s[static_cast<std::size_t>(i)].time = i;
  const auto r = balance_residual(s);
  EXPECT_TRUE(std::isnan(r[0]));
  EXPECT_EQ(r[1], 0.0);
  EXPECT_TRUE(std::isnan(r[2]));
  EXPECT_THROW(balance_residual(std::span(s).first(2)), ConfigError);
}

TEST(BalanceResidual, PureDecayIsClosed) {
  auto g = SpectralGrid::create(16, 2 * kPi);
  ModelParams p;
  p.nu = 0.01;
  p.r = p.beta = 0.0;
  p.s1 = p.s2 = 0.0;
  p.advection = false;
  LayeredField q(g);
  q[0] = cosine_mode(g, {1, 1}, 1.0);
  SimConfig c;
  c.dt = 1e-3;
  c.t_end = 0.1;
  c.cadence = 1;
  const auto rec = run(q, p, nullptr, c);
  EXPECT_LT(max_abs_finite(balance_residual(rec.samples)), 1e-6);
}

TEST(FitRate, ExactLines) {
  const std::vector<double> x{1, 2, 3, 4};
  const std::vector<double> y{3, 5, 7, 9};
  const RateFit f = fit_rate(x, y, false, false);
  EXPECT_NEAR(f.slope, 2.0, 1e-14);
  EXPECT_NEAR(f.intercept, 1.0, 1e-14);
  EXPECT_NEAR(f.r_squared, 1.0, 1e-14);

  const std::vector<double> sq{1, 4, 9, 16};
  EXPECT_NEAR(fit_rate(x, sq, true, true).slope, 2.0, 1e-10);

  const std::vector<double> decay{1.0, std::exp(-0.5), std::exp(-1.0)};
  EXPECT_NEAR(fit_rate(std::vector<double>{0, 1, 2}, decay, false, true).slope, -0.5, 1e-14);
}

TEST(FitRate, RejectsDegenerateInput) {
  const std::vector<double> two{1, 2};
  EXPECT_THROW(fit_rate(two, two, false, false), ConfigError);
  const std::vector<double> flat{2, 2, 2};
  const std::vector<double> y{1, 2, 3};
  EXPECT_THROW(fit_rate(flat, y, false, false), ConfigError);
  const std::vector<double> neg{-1, 2, 3};
  EXPECT_THROW(fit_rate(neg, y, true, false), ConfigError);
}

TEST(MeanStat, Examples) {
  const std::vector<double> v{1, 2, 3, 4};
  const MeanStat s = mean_and_stderr(v);
  EXPECT_DOUBLE_EQ(s.mean, 2.5);
  EXPECT_NEAR(s.std_error, std::sqrt(5.0 / 3.0 / 4.0), 1e-15);
  EXPECT_EQ(mean_and_stderr(std::vector<double>{7.0}).std_error, 0.0);
}

}  // namespace
