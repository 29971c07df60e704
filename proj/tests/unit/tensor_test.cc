#include <cmath>
#include <limits>

#include <gtest/gtest.h>

#include "kdvqa/error.h"
#include "kdvqa/ops.h"
#include "kdvqa/tensor.h"

namespace kdvqa {
namespace {

TEST(Tensor, ShapeContract) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<Real>(5)), Error);
  const auto t = Tensor::zeros({2, 3});
  EXPECT_EQ(t.numel(), 6u);
  EXPECT_EQ(t.rank(), 2u);
  EXPECT_EQ(shape_string(t.shape()), "[2, 3]");
  EXPECT_FALSE(t.has_grad());
}

TEST(Backward, SquareGradient) {
  Tensor x({1}, {3}, true);
  sum(mul(x, x)).backward();
  ASSERT_TRUE(x.has_grad());
  EXPECT_FLOAT_EQ(x.grad()[0], 6);
}

TEST(Backward, FanOutAccumulates) {
  Tensor x({1}, {1.5}, true);
  sum(add(x, x)).backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 2);
  // A second pass accumulates on top.
  sum(add(x, x)).backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 4);
  x.zero_grad();
  EXPECT_FALSE(x.has_grad());
}

TEST(Backward, NonScalarLossIsRejected) {
  Tensor x({2}, {1, 2}, true);
  try {
    mul(x, x).backward();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST(Backward, TapeIsReleased) {
  Tensor x({2}, {1, 2}, true);
  Tensor loss = sum(mul(x, x));
  EXPECT_GT(loss.node_id(), 0u);
  loss.backward();
  EXPECT_EQ(loss.node_id(), 0u);
}

TEST(Backward, DiamondGraph) {
  // f = sum((x*y) + (x*x)); df/dx = y + 2x, df/dy = x
  Tensor x({2}, {1, -2}, true), y({2}, {3, 4}, true);
  sum(add(mul(x, y), mul(x, x))).backward();
  EXPECT_FLOAT_EQ(x.grad()[0], 3 + 2);
  EXPECT_FLOAT_EQ(x.grad()[1], 4 - 4);
  EXPECT_FLOAT_EQ(y.grad()[0], 1);
  EXPECT_FLOAT_EQ(y.grad()[1], -2);
}

TEST(NoGrad, RecordsNothing) {
  Tensor x({1}, {2}, true);
  {
    NoGradGuard guard;
    EXPECT_FALSE(grad_enabled());
    const Tensor y = mul(x, x);
    EXPECT_EQ(y.node_id(), 0u);
    EXPECT_FALSE(y.requires_grad());
  }
  EXPECT_TRUE(grad_enabled());
}

TEST(Detach, CopiesWithoutHistory) {
  Tensor x({2}, {1, 2}, true);
  Tensor y = mul(x, x);
  Tensor d = y.detach();
  EXPECT_FALSE(d.same_storage(y));
  EXPECT_EQ(d.node_id(), 0u);
  d.data()[0] = 100;
  EXPECT_FLOAT_EQ(y.data()[0], 1);
}

TEST(Anomaly, DetectsNonFinite) {
  set_detect_anomaly(true);
  Tensor x({1}, {std::numeric_limits<Real>::infinity()});
  try {
    mul(x, Tensor({1}, {0}));
    ADD_FAILURE() << "no anomaly raised";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kNumeric);
  }
  set_detect_anomaly(false);
  EXPECT_NO_THROW(mul(x, Tensor({1}, {0})));
}

}  // namespace
}  // namespace kdvqa
