#pragma once

#include <span>

#include "kdvqa/tensor.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

// Mean over positions whose label is not kIgnoreLabel of -log softmax(row)[label].
// logits: [positions, vocab]. Ignored positions get zero gradient. Throws
// Error(kPrecondition) when every label is ignored.
Tensor cross_entropy_masked(const Tensor& logits, std::span<const int> labels);

// Mean over n of max(x, 0) - x t + log(1 + exp(-|x|)); targets must be 0 or 1.
Tensor bce_with_logits(const Tensor& logits, std::span<const Real> targets);

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
