#include "kdvqa/losses.h"

#include <cmath>

#include "kdvqa/error.h"
#include "kdvqa/mlm.h"
#include "kdvqa/ops.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

Tensor cross_entropy_masked(const Tensor& logits, std::span<const int> labels) {
  if (logits.rank() != 2 || logits.dim(0) != labels.size()) {
    fail(ErrorCode::kShape, "cross_entropy_masked: logits " + shape_string(logits.shape()) +
                                " vs " + std::to_string(labels.size()) + " labels");
  }
  const std::size_t rows = logits.dim(0);
  const std::size_t vocab = logits.dim(1);
  const auto x = logits.data();
  // Row softmax is kept for the backward pass; ignored rows stay empty.
  auto probs = std::make_shared<std::vector<Real>>(rows * vocab, Real(0));
  std::vector<int> targets(labels.begin(), labels.end());
  std::size_t counted = 0;
  double total = 0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int label = targets[r];
    if (label == kIgnoreLabel) continue;
    if (label < 0 || static_cast<std::size_t>(label) >= vocab) {
      fail(ErrorCode::kRange, "cross_entropy_masked: label " + std::to_string(label) +
                                  " outside vocabulary of " + std::to_string(vocab));
    }
    const Real* row = x.data() + r * vocab;
    Real mx = row[0];
    for (std::size_t j = 1; j < vocab; ++j) mx = std::max(mx, row[j]);
    Real z = 0;
    for (std::size_t j = 0; j < vocab; ++j) z += std::exp(row[j] - mx);
    const Real log_z = mx + std::log(z);
    Real* p = probs->data() + r * vocab;
    for (std::size_t j = 0; j < vocab; ++j) p[j] = std::exp(row[j] - log_z);
    total += static_cast<double>(log_z - row[static_cast<std::size_t>(label)]);
    ++counted;
  }
  if (counted == 0) fail(ErrorCode::kPrecondition, "cross_entropy_masked: every label is ignored");
  const Real inv = Real(1) / static_cast<Real>(counted);
  const Real value = static_cast<Real>(total / static_cast<double>(counted));
  return detail::record(
      "cross_entropy_masked", {1}, {value}, {logits},
      [probs, targets = std::move(targets), vocab, inv](const detail::TensorImpl& o, detail::Node& node) {
        auto g = detail::input_grad(node, 0);
        const Real scale = o.grad[0] * inv;
        for (std::size_t r = 0; r < targets.size(); ++r) {
          if (targets[r] == kIgnoreLabel) continue;
          const Real* p = probs->data() + r * vocab;
          Real* dst = g.data() + r * vocab;
          for (std::size_t j = 0; j < vocab; ++j) dst[j] += scale * p[j];
          dst[static_cast<std::size_t>(targets[r])] -= scale;
        }
      });
}

Tensor bce_with_logits(const Tensor& logits, std::span<const Real> targets) {
  if (logits.numel() != targets.size()) {
    fail(ErrorCode::kShape, "bce_with_logits: logits " + shape_string(logits.shape()) + " vs " +
                                std::to_string(targets.size()) + " targets");
  }
  std::vector<Real> t(targets.begin(), targets.end());
  for (Real v : t) {
    if (v != Real(0) && v != Real(1)) {
      fail(ErrorCode::kValidation, "bce_with_logits: targets must be 0 or 1");
    }
  }
  const auto x = logits.data();
  double total = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const Real v = x[i];
    total += static_cast<double>(std::max(v, Real(0)) - v * t[i] + std::log1p(std::exp(-std::abs(v))));
  }
  const Real n = static_cast<Real>(t.size());
  const Real value = static_cast<Real>(total / static_cast<double>(t.size()));
  return detail::record("bce_with_logits", {1}, {value}, {logits},
                        [t = std::move(t), n](const detail::TensorImpl& o, detail::Node& node) {
                          auto g = detail::input_grad(node, 0);
                          const auto& x = node.inputs[0]->data;
                          const Real scale = o.grad[0] / n;
                          for (std::size_t i = 0; i < g.size(); ++i) {
                            g[i] += scale * (sigmoid(x[i]) - t[i]);
                          }
                        });
}

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
