#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "convcl/errors.hpp"
#include "convcl/optim.hpp"
#include "oracles.hpp"

using namespace convcl;

namespace {

double norm(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

}  // namespace

TEST(Clip, ScalesLargeGradients) {
  std::vector<double> g = {6.0, 8.0};
  EXPECT_DOUBLE_EQ(clip_global_norm(g, 5.0), 0.5);
  EXPECT_DOUBLE_EQ(g[0], 3.0);
  EXPECT_DOUBLE_EQ(g[1], 4.0);
}

TEST(Clip, LeavesSmallGradients) {
  std::vector<double> g = {0.0, 3.0};
  EXPECT_EQ(clip_global_norm(g, 5.0), 1.0);
  EXPECT_EQ(g, (std::vector<double>{0.0, 3.0}));
}

TEST(Clip, NormBoundAndDirectionOnRandomInputs) {
  std::mt19937_64 rng(1);
  for (int t = 0; t < 1000; ++t) {
    auto g = oracle::normal_vector(1 + t % 50, rng, 0.1 + (t % 13));
    const auto before = g;
    const double s = clip_global_norm(g, 5.0);
    EXPECT_LE(norm(g), 5.0 + 1e-12);
    EXPECT_GT(s, 0.0);
    EXPECT_LE(s, 1.0);
    for (std::size_t k = 0; k < g.size(); ++k) EXPECT_EQ(g[k], before[k] * s);
  }
}

TEST(Clip, NonFiniteIsNumericError) {
  std::vector<double> g = {1.0, std::numeric_limits<double>::quiet_NaN()};
  EXPECT_THROW((void)clip_global_norm(g, 5.0), NumericError);
  std::vector<double> h = {std::numeric_limits<double>::infinity()};
  EXPECT_THROW((void)clip_global_norm(h, 5.0), NumericError);
}

TEST(Clip, MaxNormMustBePositive) {
  std::vector<double> g = {1.0};
  EXPECT_THROW((void)clip_global_norm(g, 0.0), DomainError);
}

TEST(Adam, FirstStepHasMagnitudeLr) {
  std::mt19937_64 rng(2);
  auto g = oracle::normal_vector(100, rng);
  std::vector<double> params(100, 0.5);
  AdamState state(AdamConfig{}, 100);
  const auto delta = adam_step(state, params, g);
  for (std::size_t k = 0; k < 100; ++k) {
    EXPECT_NEAR(std::abs(delta[k]), 1e-3, 1e-3 * 0.01);
    EXPECT_LT(delta[k] * g[k], 0.0);
  }
}

TEST(Adam, ZeroGradientGivesZeroStep) {
  std::vector<double> params = {1.0, -1.0};
  AdamState state(AdamConfig{}, 2);
  const auto delta = adam_step(state, params, std::vector<double>{0.0, 0.0});
  EXPECT_EQ(delta, (std::vector<double>{0.0, 0.0}));
  EXPECT_EQ(params, (std::vector<double>{1.0, -1.0}));
}

TEST(Adam, ReturnsExactlyTheAppliedDelta) {
  std::mt19937_64 rng(3);
  std::vector<double> params = oracle::normal_vector(20, rng);
  AdamState state(AdamConfig{}, 20);
  for (int t = 0; t < 50; ++t) {
    const auto before = params;
    const auto delta = adam_step(state, params, oracle::normal_vector(20, rng));
    for (std::size_t k = 0; k < 20; ++k) ASSERT_EQ(params[k], before[k] + delta[k]);
  }
}

TEST(Adam, ConvergesOnQuadratic) {
  // L = theta^2 / 2 with lr large enough to travel from 1 within 200 steps.
  std::vector<double> theta = {1.0};
  AdamState state(AdamConfig{0.05}, 1);
  for (int t = 0; t < 200; ++t) adam_step(state, theta, std::vector<double>{theta[0]});
  EXPECT_LT(std::abs(theta[0]), 0.05);
}

TEST(Adam, LengthMismatchIsAlignmentError) {
  std::vector<double> params = {1.0, 2.0};
  AdamState state(AdamConfig{}, 2);
  EXPECT_THROW((void)adam_step(state, params, std::vector<double>{1.0}), AlignmentError);
  AdamState wrong(AdamConfig{}, 3);
  EXPECT_THROW((void)adam_step(wrong, params, std::vector<double>{1.0, 1.0}), AlignmentError);
}

TEST(Adam, ResetClearsMoments) {
  std::vector<double> params = {1.0};
  AdamState state(AdamConfig{}, 1);
  adam_step(state, params, std::vector<double>{1.0});
  state.reset();
  EXPECT_EQ(state.t, 0u);
  EXPECT_EQ(state.m, (std::vector<double>{0.0}));
  EXPECT_EQ(state.v, (std::vector<double>{0.0}));
}
