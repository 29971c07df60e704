#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "kdvqa/tensor.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

struct AdamHyperparameters {
  double lr = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.0;
};

// First/second moment accumulators, one pair per parameter, in parameter order.
struct OptimizerState {
  AdamHyperparameters hyper;
  std::int64_t step = 0;
  std::vector<std::vector<Real>> first_moment;
  std::vector<std::vector<Real>> second_moment;

  OptimizerState() = default;
  OptimizerState(std::span<const Tensor> params, AdamHyperparameters hyper);
};

// Bias-corrected Adam. Parameters without a gradient are treated as having a
// zero gradient. Throws Error(kShape) if the state does not match.
void adam_step(std::span<Tensor> params, OptimizerState& state);

// Decoupled weight decay, param *= (1 - lr * wd), applied before the Adam
// update. With weight_decay == 0 this runs exactly the adam_step code path.
void adamw_step(std::span<Tensor> params, OptimizerState& state);

// Rescales all gradients so their joint L2 norm is at most max_norm; returns
// the norm before clipping.
double clip_grad_norm(std::span<Tensor> params, double max_norm);

void zero_grad(std::span<Tensor> params);

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
