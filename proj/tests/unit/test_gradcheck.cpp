#include <gtest/gtest.h>

#include <cmath>

#include "convcl/gradcheck.hpp"

using namespace convcl;

TEST(RelativeError, FloorAndSymmetry) {
  EXPECT_EQ(relative_error(1.0, 1.0), 0.0);
  EXPECT_DOUBLE_EQ(relative_error(2.0, 1.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1.0, 2.0), 0.5);
  EXPECT_DOUBLE_EQ(relative_error(1e-9, 0.0), 1e-3);
}

TEST(LeafGradient, DetectsWrongGradient) {
  // exp is right; a hand-built "square" that forgets the factor 2 is not.
  const LeafLoss good = [](Tape&, std::span<const Tensor> x) { return sum(exp(x[0])); };
  EXPECT_LT(leaf_gradient_error({{0.3, -1.2}}, {{2}}, good), 1e-6);
  const LeafLoss wrong = [](Tape& tape, std::span<const Tensor> x) {
    // d/dx of x*c with c a detached copy of x is c, half the true slope of x^2.
    auto c = tape.constant({x[0].values().begin(), x[0].values().end()}, x[0].shape());
    return sum(mul(x[0], c));
  };
  EXPECT_GT(leaf_gradient_error({{0.7}}, {{1}}, wrong), 0.4);
}

TEST(Suite, EveryCasePasses) {
  const auto results = run_gradient_suite(7, 100);
  ASSERT_GE(results.size(), 20u);
  for (const auto& r : results) {
    EXPECT_EQ(r.trials, 100u) << r.name;
    EXPECT_TRUE(r.passed) << r.name << " " << r.max_rel_error;
    EXPECT_LT(r.max_rel_error, 1e-4) << r.name;
  }
}
