#include "kdvqa/optim.h"

#include <cmath>

#include "kdvqa/error.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {
namespace {

void adam_update(std::span<Tensor> params, OptimizerState& state, bool decoupled_decay) {
  if (params.size() != state.first_moment.size()) {
    fail(ErrorCode::kShape, "optimizer state tracks " + std::to_string(state.first_moment.size()) +
                                " parameters, got " + std::to_string(params.size()));
  }
  const auto& h = state.hyper;
  ++state.step;
  const double t = static_cast<double>(state.step);
  const Real b1 = static_cast<Real>(h.beta1);
  const Real b2 = static_cast<Real>(h.beta2);
  const Real correction1 = static_cast<Real>(1.0 - std::pow(h.beta1, t));
  const Real correction2 = static_cast<Real>(1.0 - std::pow(h.beta2, t));
  const Real lr = static_cast<Real>(h.lr);
  const Real eps = static_cast<Real>(h.eps);
  const bool decay = decoupled_decay && h.weight_decay != 0.0;
  const Real shrink = static_cast<Real>(1.0 - h.lr * h.weight_decay);

  for (std::size_t p = 0; p < params.size(); ++p) {
    auto data = params[p].data();
    auto& m = state.first_moment[p];
    auto& v = state.second_moment[p];
    if (m.size() != data.size()) {
      fail(ErrorCode::kShape, "optimizer state for parameter " + std::to_string(p) +
                                  " does not match shape " + shape_string(params[p].shape()));
    }
    const auto grad = std::as_const(params[p]).grad();
    for (std::size_t i = 0; i < data.size(); ++i) {
      const Real g = grad.empty() ? Real(0) : grad[i];
      if (decay) data[i] *= shrink;
      m[i] = b1 * m[i] + (Real(1) - b1) * g;
      v[i] = b2 * v[i] + (Real(1) - b2) * g * g;
      const Real m_hat = m[i] / correction1;
      const Real v_hat = v[i] / correction2;
      data[i] -= lr * m_hat / (std::sqrt(v_hat) + eps);
    }
  }
}

}  // namespace

OptimizerState::OptimizerState(std::span<const Tensor> params, AdamHyperparameters h)
    : hyper(h) {
  for (const auto& p : params) {
    first_moment.emplace_back(p.numel(), Real(0));
    second_moment.emplace_back(p.numel(), Real(0));
  }
}

void adam_step(std::span<Tensor> params, OptimizerState& state) { adam_update(params, state, false); }

void adamw_step(std::span<Tensor> params, OptimizerState& state) { adam_update(params, state, true); }

double clip_grad_norm(std::span<Tensor> params, double max_norm) {
  double sq = 0;
  for (auto& p : params) {
    for (Real g : p.grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (max_norm > 0 && norm > max_norm) {
    const Real factor = static_cast<Real>(max_norm / norm);
    for (auto& p : params) {
      for (Real& g : p.grad()) g *= factor;
    }
  }
  return norm;
}

void zero_grad(std::span<Tensor> params) {
  for (auto& p : params) p.zero_grad();
}

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
