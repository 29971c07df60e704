#include <cmath>

#include <gtest/gtest.h>

#include "kdvqa/error.h"
#include "kdvqa/ops.h"
#include "kdvqa/optim.h"
#include "kdvqa/rng.h"

namespace kdvqa {
namespace {

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Tensor> params = {Tensor({1}, {0}, true)};
  OptimizerState state(params, {.lr = 0.1});
  sum(params[0]).backward();
  adam_step(params, state);
  EXPECT_NEAR(params[0].data()[0], -0.1, 1e-6);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, MatchesScalarOracleOverSteps) {
  Tensor p({3}, {0.5, -1, 2}, true);
  std::vector<Tensor> params = {p};
  AdamHyperparameters h{.lr = 0.01};
  OptimizerState state(params, h);
  std::vector<double> x = {0.5, -1, 2}, m(3, 0), v(3, 0);
  for (int t = 1; t <= 5; ++t) {
    zero_grad(params);
    sum(mul(p, p)).backward();
    adam_step(params, state);
    for (int i = 0; i < 3; ++i) {
      const double g = 2 * x[i];
      m[i] = h.beta1 * m[i] + (1 - h.beta1) * g;
      v[i] = h.beta2 * v[i] + (1 - h.beta2) * g * g;
      const double mh = m[i] / (1 - std::pow(h.beta1, t)), vh = v[i] / (1 - std::pow(h.beta2, t));
      x[i] -= h.lr * mh / (std::sqrt(vh) + h.eps);
    }
  }
  for (int i = 0; i < 3; ++i) EXPECT_NEAR(p.data()[i], x[i], 1e-5);
}

TEST(AdamW, ZeroDecayIsBitwiseAdam) {
  Rng rng(5);
  std::vector<Real> init(20);
  for (auto& x : init) x = static_cast<Real>(rng.normal());
  Tensor a({20}, init, true), b({20}, init, true);
  std::vector<Tensor> pa = {a}, pb = {b};
  OptimizerState sa(pa, {.lr = 0.01}), sb(pb, {.lr = 0.01, .weight_decay = 0});
  for (int t = 0; t < 10; ++t) {
    zero_grad(pa);
    zero_grad(pb);
    sum(mul(mul(a, a), a)).backward();
    sum(mul(mul(b, b), b)).backward();
    adam_step(pa, sa);
    adamw_step(pb, sb);
  }
  for (std::size_t i = 0; i < 20; ++i) EXPECT_EQ(a.data()[i], b.data()[i]);
}

TEST(AdamW, ZeroGradientDecaysOnly) {
  std::vector<Tensor> params = {Tensor({2}, {1, -2}, true)};
  OptimizerState state(params, {.lr = 0.1, .weight_decay = 0.01});
  adamw_step(params, state);
  EXPECT_NEAR(params[0].data()[0], 0.999, 1e-6);
  EXPECT_NEAR(params[0].data()[1], -1.998, 1e-6);
  EXPECT_EQ(state.step, 1);
}

TEST(Optimizer, StateMismatchIsShapeError) {
  std::vector<Tensor> a = {Tensor::zeros({2}, true)};
  std::vector<Tensor> b = {Tensor::zeros({3}, true)};
  OptimizerState state(a, {});
  try {
    adam_step(b, state);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST(ClipGradNorm, RescalesToMaxNorm) {
  Tensor p({2}, {3, 4}, true);
  std::vector<Tensor> params = {p};
  sum(mul(p, Tensor({2}, {3, 4}))).backward();  // grad (3, 4), norm 5
  EXPECT_NEAR(clip_grad_norm(params, 1.0), 5.0, 1e-6);
  EXPECT_NEAR(p.grad()[0], 0.6, 1e-6);
  EXPECT_NEAR(p.grad()[1], 0.8, 1e-6);
  EXPECT_NEAR(clip_grad_norm(params, 10.0), 1.0, 1e-6);
  EXPECT_NEAR(p.grad()[0], 0.6, 1e-6);
}

}  // namespace
}  // namespace kdvqa
