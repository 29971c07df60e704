#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "kdvqa/error.h"
#include "kdvqa/losses.h"
#include "kdvqa/mlm.h"
#include "kdvqa/rng.h"

namespace kdvqa {
namespace {

TEST(CrossEntropy, UniformTwoClass) {
  const std::vector<int> labels = {1};
  EXPECT_NEAR(cross_entropy_masked(Tensor({1, 2}, {0, 0}), labels).item(), std::log(2.0), 1e-6);
}

TEST(CrossEntropy, IgnoredPositionContributesNothing) {
  Tensor logits({2, 3}, {1, 2, 3, 50, -50, 7}, true);
  const std::vector<int> labels = {2, kIgnoreLabel};
  auto loss = cross_entropy_masked(logits, labels);
  const double z = std::exp(1.0) + std::exp(2.0) + std::exp(3.0);
  EXPECT_NEAR(loss.item(), -(3.0 - std::log(z)), 1e-5);
  loss.backward();
  for (std::size_t j = 3; j < 6; ++j) EXPECT_EQ(logits.grad()[j], 0);
}

TEST(CrossEntropy, MatchesScalarLoopOracle) {
  Rng rng(11);
  std::vector<Real> v(4 * 7);
  for (auto& x : v) x = static_cast<Real>(rng.uniform() * 8 - 4);
  const std::vector<int> labels = {3, kIgnoreLabel, 0, 6};
  const auto loss = cross_entropy_masked(Tensor({4, 7}, v), labels);
  double total = 0;
  int counted = 0;
  for (int r = 0; r < 4; ++r) {
    if (labels[r] == kIgnoreLabel) continue;
    double z = 0;
    for (int c = 0; c < 7; ++c) z += std::exp(static_cast<double>(v[r * 7 + c]));
    total += std::log(z) - v[r * 7 + labels[r]];
    ++counted;
  }
  EXPECT_NEAR(loss.item(), total / counted, 1e-6);
}

TEST(CrossEntropy, AllIgnoredIsPrecondition) {
  const std::vector<int> labels = {kIgnoreLabel, kIgnoreLabel};
  try {
    cross_entropy_masked(Tensor::zeros({2, 3}), labels);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kPrecondition);
  }
}

TEST(Bce, ZeroLogitIsLogTwo) {
  const std::vector<Real> t = {1};
  EXPECT_NEAR(bce_with_logits(Tensor({1}, {0}), t).item(), std::log(2.0), 1e-6);
}

TEST(Bce, LargeLogitsStayFinite) {
  const std::vector<Real> t = {1, 0};
  Tensor x({2}, {80, -80}, true);
  auto loss = bce_with_logits(x, t);
  EXPECT_TRUE(std::isfinite(loss.item()));
  EXPECT_NEAR(loss.item(), 0, 1e-6);
  loss.backward();
  for (Real g : x.grad()) EXPECT_TRUE(std::isfinite(g));
  const std::vector<Real> wrong = {0};
  EXPECT_NEAR(bce_with_logits(Tensor({1}, {80}), wrong).item(), 80, 1e-4);
}

TEST(Bce, MatchesLongDoubleOracle) {
  Rng rng(12);
  std::vector<Real> x(9), t(9);
  for (std::size_t i = 0; i < 9; ++i) {
    x[i] = static_cast<Real>(rng.uniform() * 20 - 10);
    t[i] = rng.bernoulli(0.5) ? 1 : 0;
  }
  long double total = 0;
  for (std::size_t i = 0; i < 9; ++i) {
    const long double p = 1.0L / (1.0L + std::exp(-static_cast<long double>(x[i])));
    total += -(t[i] * std::log(p) + (1 - t[i]) * std::log(1 - p));
  }
  EXPECT_NEAR(bce_with_logits(Tensor({9}, x), t).item(), static_cast<double>(total / 9), 1e-6);
}

TEST(Bce, GradientIsSigmoidMinusTarget) {
  Tensor x({2}, {0.5, -1}, true);
  const std::vector<Real> t = {1, 0};
  bce_with_logits(x, t).backward();
  EXPECT_NEAR(x.grad()[0], (1 / (1 + std::exp(-0.5)) - 1) / 2, 1e-6);
  EXPECT_NEAR(x.grad()[1], (1 / (1 + std::exp(1.0))) / 2, 1e-6);
}

TEST(Bce, NonBinaryTargetRejected) {
  const std::vector<Real> t = {0.5};
  try {
    bce_with_logits(Tensor({1}, {0}), t);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kValidation);
  }
}

}  // namespace
}  // namespace kdvqa
