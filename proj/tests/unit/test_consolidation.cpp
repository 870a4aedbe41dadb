#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "convcl/consolidation.hpp"
#include "convcl/errors.hpp"
#include "convcl/optim.hpp"
#include "oracles.hpp"

using namespace convcl;

namespace {

ConsolidationState state_with(ConsolidationMode mode, double decay, std::size_t n, double c = 0.01,
                              double damping = 1e-3) {
  return ConsolidationState({mode, c, decay, damping}, n);
}

std::vector<double> vec(std::span<const double> s) { return {s.begin(), s.end()}; }

}  // namespace

TEST(OnStep, DecayedSubstitution) {
  auto s = state_with(ConsolidationMode::Adaptive, 0.9, 1);
  s.restore({1.0}, {0.0}, {0.0}, {});
  s.on_step(std::vector<double>{0.5}, std::vector<double>{-0.1});
  EXPECT_NEAR(s.omega()[0], 0.95, 1e-15);
  EXPECT_NEAR(s.delta()[0], -0.1, 1e-15);
}

TEST(OnStep, UndecayedAccumulation) {
  auto s = state_with(ConsolidationMode::PathIntegral, 1.0, 1);
  s.on_step(std::vector<double>{1.0}, std::vector<double>{-0.1});
  s.on_step(std::vector<double>{0.5}, std::vector<double>{-0.1});
  EXPECT_NEAR(s.omega()[0], 0.15, 1e-15);
  EXPECT_NEAR(s.delta()[0], -0.2, 1e-15);
  EXPECT_EQ(s.steps_in_task(), 2u);
}

TEST(OnStep, LengthMismatchIsAlignmentError) {
  auto s = state_with(ConsolidationMode::Adaptive, 0.9, 2);
  EXPECT_THROW(s.on_step(std::vector<double>{1.0}, std::vector<double>{1.0, 2.0}), AlignmentError);
  EXPECT_THROW(s.on_task_end(std::vector<double>{1.0}), AlignmentError);
}

TEST(OnStep, QuadraticDescentMatchesLossDecrease) {
  // L = (theta - 1)^2 / 2 from theta = 0, plain gradient descent.
  auto s = state_with(ConsolidationMode::PathIntegral, 1.0, 1);
  double theta = 0.0;
  auto loss = [](double t) { return 0.5 * (t - 1.0) * (t - 1.0); };
  const double start = loss(theta);
  for (int i = 0; i < 500; ++i) {
    const double g = theta - 1.0;
    const double step = -0.01 * g;
    theta += step;
    s.on_step(std::vector<double>{g}, std::vector<double>{step});
  }
  const double decrease = start - loss(theta);
  EXPECT_NEAR(s.omega()[0] / decrease, 1.0, 0.05);
}

TEST(OnTaskEnd, ImportanceExamples) {
  auto s = state_with(ConsolidationMode::PathIntegral, 1.0, 3);
  s.restore({2.0, -0.5, 1.0}, {1.0, 0.3, 0.0}, {0.0, 0.0, 0.0}, {});
  s.on_task_end(std::vector<double>{7.0, 8.0, 9.0});
  EXPECT_NEAR(s.importance()[0], 2.0 / 1.001, 1e-12);
  EXPECT_NEAR(s.importance()[0], 1.998, 1e-3);
  EXPECT_EQ(s.importance()[1], 0.0);
  EXPECT_NEAR(s.importance()[2], 1000.0, 1e-9);
  EXPECT_EQ(vec(s.anchor()), (std::vector<double>{7, 8, 9}));
  EXPECT_EQ(vec(s.omega()), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(vec(s.delta()), (std::vector<double>{0, 0, 0}));
  EXPECT_EQ(s.steps_in_task(), 0u);
}

TEST(OnTaskEnd, ImportanceNeverDecreases) {
  std::mt19937_64 rng(1);
  auto s = state_with(ConsolidationMode::Adaptive, 0.99, 6);
  std::vector<double> previous(6, 0.0);
  for (int task = 0; task < 5; ++task) {
    for (int step = 0; step < 30; ++step) s.on_step(oracle::normal_vector(6, rng), oracle::normal_vector(6, rng, 0.01));
    s.on_task_end(oracle::normal_vector(6, rng));
    for (std::size_t k = 0; k < 6; ++k) {
      EXPECT_GE(s.importance()[k], previous[k]);
      EXPECT_GE(s.importance()[k], 0.0);
    }
    previous = vec(s.importance());
  }
}

TEST(Modes, AdaptiveWithUnitDecayEqualsPathIntegral) {
  std::mt19937_64 rng(2);
  auto a = state_with(ConsolidationMode::Adaptive, 1.0, 5);
  auto p = state_with(ConsolidationMode::PathIntegral, 1.0, 5);
  for (int task = 0; task < 3; ++task) {
    for (int step = 0; step < 40; ++step) {
      const auto g = oracle::normal_vector(5, rng);
      const auto d = oracle::normal_vector(5, rng, 0.01);
      a.on_step(g, d);
      p.on_step(g, d);
      ASSERT_EQ(vec(a.omega()), vec(p.omega()));
      ASSERT_EQ(vec(a.delta()), vec(p.delta()));
    }
    const auto theta = oracle::normal_vector(5, rng);
    a.on_task_end(theta);
    p.on_task_end(theta);
    ASSERT_EQ(vec(a.importance()), vec(p.importance()));
  }
}

TEST(Modes, DecayBoundsOmega) {
  const double decay = 0.9;
  const double bound = 0.02;  // max |g * dtheta| per step
  auto s = state_with(ConsolidationMode::Adaptive, decay, 4);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  for (int step = 0; step < 2000; ++step) {
    std::vector<double> g(4), d(4);
    for (std::size_t k = 0; k < 4; ++k) {
      g[k] = u(rng);
      d[k] = bound * u(rng);
    }
    s.on_step(g, d);
    for (double w : s.omega()) ASSERT_LE(std::abs(w), bound / (1.0 - decay) + 1e-12);
  }
}

TEST(Modes, InvalidHyperparameters) {
  EXPECT_THROW(state_with(ConsolidationMode::Adaptive, 0.0, 1), ConfigError);
  EXPECT_THROW(state_with(ConsolidationMode::Adaptive, 1.5, 1), ConfigError);
  EXPECT_THROW(state_with(ConsolidationMode::Adaptive, 0.9, 1, 0.01, 0.0), ConfigError);
  EXPECT_THROW(state_with(ConsolidationMode::Adaptive, 0.9, 1, -1.0), ConfigError);
  EXPECT_EQ(parse_consolidation_mode("fisher"), ConsolidationMode::Fisher);
  EXPECT_THROW((void)parse_consolidation_mode("ewc"), ConfigError);
}

TEST(Penalty, ZeroBeforeFirstBoundaryAndAtAnchor) {
  auto s = state_with(ConsolidationMode::Adaptive, 0.9, 2);
  Tape tape;
  auto theta = tape.variable({1.0, -2.0}, {2});
  EXPECT_EQ(s.surrogate_penalty(theta).item(), 0.0);
  s.on_step(std::vector<double>{1.0, 1.0}, std::vector<double>{-0.1, -0.2});
  s.on_task_end(std::vector<double>{1.0, -2.0});
  EXPECT_EQ(s.surrogate_penalty(theta).item(), 0.0);
  EXPECT_EQ(s.penalty_value(std::vector<double>{1.0, -2.0}), 0.0);
}

TEST(Penalty, SingleParameterExample) {
  auto s = state_with(ConsolidationMode::Adaptive, 0.9, 1, 0.01);
  s.restore({0.0}, {0.0}, {1.0}, {3.0});
  Tape tape;
  auto theta = tape.variable({1.0}, {1});
  auto p = s.surrogate_penalty(theta);
  EXPECT_NEAR(p.item(), 0.04, 1e-15);
  tape.backward(p);
  EXPECT_NEAR(theta.grad()[0], 2 * 0.01 * 1.0 * (1.0 - 3.0), 1e-15);
  EXPECT_NEAR(s.penalty_value(std::vector<double>{1.0}), 0.04, 1e-15);
}

TEST(Penalty, GradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(4);
  for (int trial = 0; trial < 50; ++trial) {
    const std::size_t n = 1 + trial % 7;
    auto s = state_with(ConsolidationMode::Adaptive, 0.9, n, 0.3);
    auto imp = oracle::normal_vector(n, rng);
    for (auto& v : imp) v = std::abs(v);
    s.restore(std::vector<double>(n, 0.0), std::vector<double>(n, 0.0), imp, oracle::normal_vector(n, rng));
    const auto x = oracle::normal_vector(n, rng);
    Tape tape;
    auto theta = tape.variable(x, {n});
    tape.backward(s.surrogate_penalty(theta));
    const std::vector<double> analytic(theta.grad().begin(), theta.grad().end());
    const auto numeric = oracle::numeric_gradient([&](const std::vector<double>& v) { return s.penalty_value(v); }, x);
    EXPECT_LT(oracle::max_relative_error(analytic, numeric), 1e-6);
  }
}

TEST(Penalty, OffModeIsZeroEvenWhenAnchored) {
  auto s = state_with(ConsolidationMode::Off, 0.9, 1);
  s.restore({0.0}, {0.0}, {5.0}, {3.0});
  Tape tape;
  EXPECT_EQ(s.surrogate_penalty(tape.variable({1.0}, {1})).item(), 0.0);
}

TEST(Fisher, Examples) {
  auto s = state_with(ConsolidationMode::Fisher, 1.0, 2);
  s.fisher_update(std::vector<double>{0.0, 0.0});
  EXPECT_EQ(vec(s.fisher().sum_sq), (std::vector<double>{0, 0}));
  auto t = state_with(ConsolidationMode::Fisher, 1.0, 1);
  t.fisher_update(std::vector<double>{1.0});
  t.fisher_update(std::vector<double>{3.0});
  t.on_task_end(std::vector<double>{0.0});
  EXPECT_DOUBLE_EQ(t.importance()[0], 5.0);
  EXPECT_EQ(t.fisher().count, 0u);
}

TEST(Fisher, FlatRegionForgetsWhilePathIntegralRemembers) {
  // 1-D quadratic trained to convergence: the final gradient is ~0, but the
  // trajectory moved the parameter a long way.
  auto fisher = state_with(ConsolidationMode::Fisher, 1.0, 1);
  auto path = state_with(ConsolidationMode::PathIntegral, 1.0, 1);
  AdamState adam(AdamConfig{0.05}, 1);
  std::vector<double> theta = {4.0};
  for (int i = 0; i < 3000; ++i) {
    std::vector<double> g = {theta[0] - 1.0};
    auto step = adam_step(adam, theta, g);
    path.on_step(g, step);
  }
  fisher.fisher_update(std::vector<double>{theta[0] - 1.0});
  fisher.on_task_end(theta);
  path.on_task_end(theta);
  EXPECT_LT(fisher.importance()[0], 1e-6);
  EXPECT_GT(path.importance()[0], 1e-2);
}

TEST(Export, WritesOneRowPerScalar) {
  ParamStore store;
  store.add("a", {2});
  store.add("b", {1, 2});
  auto s = state_with(ConsolidationMode::PathIntegral, 1.0, 4);
  s.restore({1, 0, 2, 0}, {0, 0, 0, 0}, {0, 0, 0, 0}, {});
  s.on_task_end(std::vector<double>{0, 0, 0, 0});
  const auto dir = oracle::scratch_dir("importance");
  export_importance(s, store, dir / "imp.tsv");
  const auto text = oracle::slurp(dir / "imp.tsv");
  EXPECT_EQ(text.substr(0, text.find('\n')), "param\tindex\tflat_index\timportance");
  EXPECT_EQ(std::count(text.begin(), text.end(), '\n'), 5);
  EXPECT_NE(text.find("b\t0\t2\t2000"), std::string::npos) << text;
}
