#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "kdvqa/rng.h"
#include "kdvqa/tensor.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

// Differentiable kernels. Shape violations throw Error(kShape) naming both
// operand shapes.

// [m, k] x [k, n] -> [m, n], or batched [g, m, k] x [g, k, n] -> [g, m, n].
// The transpose flags apply to the last two axes of the respective operand.
Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a = false, bool transpose_b = false);

Tensor add(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor scale(const Tensor& x, Real factor);

// x + bias, with bias broadcast along every axis but the last.
Tensor add_bias(const Tensor& x, const Tensor& bias);

// x * gamma + beta over the last axis.
Tensor scale_shift(const Tensor& x, const Tensor& gamma, const Tensor& beta);

// Swaps the last two axes of a rank-2 or rank-3 tensor.
Tensor transpose(const Tensor& x);

Tensor reshape(const Tensor& x, Shape shape);
Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes);

// Rows of a [rows, d] table -> [ids.size(), d]. Also used to gather
// activations (e.g. the [CLS] rows of a batch).
Tensor embedding_lookup(const Tensor& table, std::span<const int> ids);

Tensor softmax(const Tensor& x, std::size_t axis);

// Normalizes to zero mean and unit variance along `axis`.
Tensor layer_norm(const Tensor& x, std::size_t axis, Real eps = Real(1e-5));
// Last-axis normalization followed by the learned affine map.
Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps = Real(1e-5));

// Exact (erf) form.
Tensor gelu(const Tensor& x);

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis);
Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length);

Tensor sum(const Tensor& x);
Tensor mean(const Tensor& x);

// Inverted dropout; identity when p == 0.
Tensor dropout(const Tensor& x, Real p, Rng& rng);

// Attention scores [batch * heads, queries, keys]: keys at or beyond the
// valid length of their batch row get -1e9 so softmax assigns them zero
// weight; their gradient is zero.
Tensor mask_padded_keys(const Tensor& scores, std::span<const int> valid_lengths, std::size_t heads);

// x W + b with x [n, in], W [in, out], b [out].
Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias);

Real sigmoid(Real x);

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
