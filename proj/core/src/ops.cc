#include "kdvqa/ops.h"

#include <cmath>
#include <numbers>

#include "kdvqa/error.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {
namespace {

using detail::input_grad;
using detail::Node;
using detail::record;
using detail::TensorImpl;

[[noreturn]] void shape_error(std::string_view op, const Shape& a, const Shape& b) {
  fail(ErrorCode::kShape, std::string(op) + ": incompatible shapes " + shape_string(a) + " and " +
                              shape_string(b));
}

// C[m, n] += A[m, k] * B[k, n], row-major.
void gemm_acc(std::size_t m, std::size_t n, std::size_t k, const Real* a, const Real* b, Real* c) {
  for (std::size_t i = 0; i < m; ++i) {
    Real* crow = c + i * n;
    const Real* arow = a + i * k;
    for (std::size_t p = 0; p < k; ++p) {
      const Real av = arow[p];
      const Real* brow = b + p * n;
      for (std::size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

std::vector<Real> transposed(const Real* x, std::size_t rows, std::size_t cols) {
  std::vector<Real> out(rows * cols);
  for (std::size_t r = 0; r < rows; ++r) {
    for (std::size_t c = 0; c < cols; ++c) out[c * rows + r] = x[r * cols + c];
  }
  return out;
}

struct AxisSplit {
  std::size_t outer = 1, extent = 1, inner = 1;
};

AxisSplit split_axis(const Shape& shape, std::size_t axis, std::string_view op) {
  if (axis >= shape.size()) {
    fail(ErrorCode::kShape, std::string(op) + ": axis " + std::to_string(axis) +
                                " invalid for shape " + shape_string(shape));
  }
  AxisSplit s;
  for (std::size_t i = 0; i < axis; ++i) s.outer *= shape[i];
  s.extent = shape[axis];
  for (std::size_t i = axis + 1; i < shape.size(); ++i) s.inner *= shape[i];
  return s;
}

void require_same_shape(std::string_view op, const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) shape_error(op, a.shape(), b.shape());
}

}  // namespace

Real sigmoid(Real x) {
  if (x >= 0) return Real(1) / (Real(1) + std::exp(-x));
  const Real e = std::exp(x);
  return e / (Real(1) + e);
}

Tensor matmul(const Tensor& a, const Tensor& b, bool transpose_a, bool transpose_b) {
  const auto& as = a.shape();
  const auto& bs = b.shape();
  if (as.size() != bs.size() || (as.size() != 2 && as.size() != 3)) shape_error("matmul", as, bs);
  const bool batched = as.size() == 3;
  const std::size_t groups = batched ? as[0] : 1;
  if (batched && bs[0] != groups) shape_error("matmul", as, bs);
  const std::size_t ar = as[as.size() - 2], ac = as.back();
  const std::size_t br = bs[bs.size() - 2], bc = bs.back();
  const std::size_t m = transpose_a ? ac : ar;
  const std::size_t k = transpose_a ? ar : ac;
  const std::size_t kb = transpose_b ? bc : br;
  const std::size_t n = transpose_b ? br : bc;
  if (k != kb) shape_error("matmul", as, bs);

  const auto a_data = a.data();
  const auto b_data = b.data();
  std::vector<Real> out(groups * m * n, Real(0));
  for (std::size_t g = 0; g < groups; ++g) {
    const Real* ag = a_data.data() + g * ar * ac;
    const Real* bg = b_data.data() + g * br * bc;
    std::vector<Real> at, bt;
    if (transpose_a) at = transposed(ag, ar, ac);
    if (transpose_b) bt = transposed(bg, br, bc);
    gemm_acc(m, n, k, transpose_a ? at.data() : ag, transpose_b ? bt.data() : bg,
             out.data() + g * m * n);
  }
  Shape shape = batched ? Shape{groups, m, n} : Shape{m, n};
  return record("matmul", std::move(shape), std::move(out), {a, b},
                [=](const TensorImpl& o, Node& node) {
                  const auto& A = node.inputs[0]->data;
                  const auto& B = node.inputs[1]->data;
                  auto ga = input_grad(node, 0);
                  auto gb = input_grad(node, 1);
                  for (std::size_t g = 0; g < groups; ++g) {
                    const Real* dc = o.grad.data() + g * m * n;
                    const Real* ag = A.data() + g * ar * ac;
                    const Real* bg = B.data() + g * br * bc;
                    if (!ga.empty()) {
                      // d op(A) = dC op(B)^T, op(B)^T is [n, k].
                      std::vector<Real> bt_k = transpose_b ? std::vector<Real>(bg, bg + br * bc)
                                                           : transposed(bg, br, bc);
                      std::vector<Real> dop(m * k, Real(0));
                      gemm_acc(m, k, n, dc, bt_k.data(), dop.data());
                      Real* dst = ga.data() + g * ar * ac;
                      if (transpose_a) {
                        for (std::size_t i = 0; i < m; ++i)
                          for (std::size_t p = 0; p < k; ++p) dst[p * m + i] += dop[i * k + p];
                      } else {
                        for (std::size_t i = 0; i < m * k; ++i) dst[i] += dop[i];
                      }
                    }
                    if (!gb.empty()) {
                      // d op(B) = op(A)^T dC, op(A)^T is [k, m].
                      std::vector<Real> at_k = transpose_a ? std::vector<Real>(ag, ag + ar * ac)
                                                           : transposed(ag, ar, ac);
                      std::vector<Real> dop(k * n, Real(0));
                      gemm_acc(k, n, m, at_k.data(), dc, dop.data());
                      Real* dst = gb.data() + g * br * bc;
                      if (transpose_b) {
                        for (std::size_t p = 0; p < k; ++p)
                          for (std::size_t j = 0; j < n; ++j) dst[j * k + p] += dop[p * n + j];
                      } else {
                        for (std::size_t i = 0; i < k * n; ++i) dst[i] += dop[i];
                      }
                    }
                  }
                });
}

Tensor add(const Tensor& a, const Tensor& b) {
  require_same_shape("add", a, b);
  std::vector<Real> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] + y[i];
  return record("add", a.shape(), std::move(out), {a, b}, [](const TensorImpl& o, Node& node) {
    for (std::size_t in = 0; in < 2; ++in) {
      auto g = input_grad(node, in);
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
    }
  });
}

Tensor mul(const Tensor& a, const Tensor& b) {
  require_same_shape("mul", a, b);
  std::vector<Real> out(a.numel());
  const auto x = a.data();
  const auto y = b.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = x[i] * y[i];
  return record("mul", a.shape(), std::move(out), {a, b}, [](const TensorImpl& o, Node& node) {
    const auto& x = node.inputs[0]->data;
    const auto& y = node.inputs[1]->data;
    auto ga = input_grad(node, 0);
    auto gb = input_grad(node, 1);
    for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += o.grad[i] * y[i];
    for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += o.grad[i] * x[i];
  });
}

Tensor scale(const Tensor& x, Real factor) {
  std::vector<Real> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  return record("scale", x.shape(), std::move(out), {x}, [factor](const TensorImpl& o, Node& node) {
    auto g = input_grad(node, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * factor;
  });
}

Tensor add_bias(const Tensor& x, const Tensor& bias) {
  if (bias.rank() != 1 || bias.dim(0) != x.shape().back()) shape_error("add_bias", x.shape(), bias.shape());
  const std::size_t n = bias.dim(0);
  std::vector<Real> out(x.data().begin(), x.data().end());
  const auto b = bias.data();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] += b[i % n];
  return record("add_bias", x.shape(), std::move(out), {x, bias}, [n](const TensorImpl& o, Node& node) {
    auto gx = input_grad(node, 0);
    auto gb = input_grad(node, 1);
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += o.grad[i];
    if (!gb.empty()) {
      for (std::size_t i = 0; i < o.grad.size(); ++i) gb[i % n] += o.grad[i];
    }
  });
}

Tensor scale_shift(const Tensor& x, const Tensor& gamma, const Tensor& beta) {
  const std::size_t n = x.shape().back();
  if (gamma.rank() != 1 || gamma.dim(0) != n) shape_error("scale_shift", x.shape(), gamma.shape());
  if (beta.rank() != 1 || beta.dim(0) != n) shape_error("scale_shift", x.shape(), beta.shape());
  const auto xv = x.data();
  const auto gv = gamma.data();
  const auto bv = beta.data();
  std::vector<Real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * gv[i % n] + bv[i % n];
  return record("scale_shift", x.shape(), std::move(out), {x, gamma, beta},
                [n](const TensorImpl& o, Node& node) {
                  const auto& xv = node.inputs[0]->data;
                  const auto& gv = node.inputs[1]->data;
                  auto gx = input_grad(node, 0);
                  auto gg = input_grad(node, 1);
                  auto gb = input_grad(node, 2);
                  for (std::size_t i = 0; i < o.grad.size(); ++i) {
                    const Real d = o.grad[i];
                    if (!gx.empty()) gx[i] += d * gv[i % n];
                    if (!gg.empty()) gg[i % n] += d * xv[i];
                    if (!gb.empty()) gb[i % n] += d;
                  }
                });
}

Tensor transpose(const Tensor& x) {
  if (x.rank() == 2) return permute(x, {1, 0});
  if (x.rank() == 3) return permute(x, {0, 2, 1});
  fail(ErrorCode::kShape, "transpose: expected rank 2 or 3, got " + shape_string(x.shape()));
}

Tensor reshape(const Tensor& x, Shape shape) {
  if (shape_numel(shape) != x.numel()) shape_error("reshape", x.shape(), shape);
  std::vector<Real> out(x.data().begin(), x.data().end());
  return record("reshape", std::move(shape), std::move(out), {x}, [](const TensorImpl& o, Node& node) {
    auto g = input_grad(node, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i];
  });
}

Tensor permute(const Tensor& x, const std::vector<std::size_t>& axes) {
  const auto& in_shape = x.shape();
  const std::size_t r = in_shape.size();
  std::vector<bool> used(r, false);
  if (axes.size() != r) shape_error("permute", in_shape, Shape(axes.begin(), axes.end()));
  for (std::size_t a : axes) {
    if (a >= r || used[a]) shape_error("permute", in_shape, Shape(axes.begin(), axes.end()));
    used[a] = true;
  }
  Shape out_shape(r);
  for (std::size_t i = 0; i < r; ++i) out_shape[i] = in_shape[axes[i]];
  std::vector<std::size_t> in_strides(r, 1);
  for (std::size_t i = r; i-- > 1;) in_strides[i - 1] = in_strides[i] * in_shape[i];

  // source[i] = flat input index feeding flat output index i.
  const std::size_t n = x.numel();
  auto source = std::make_shared<std::vector<std::size_t>>(n);
  std::vector<std::size_t> idx(r, 0);
  for (std::size_t i = 0; i < n; ++i) {
    std::size_t src = 0;
    for (std::size_t d = 0; d < r; ++d) src += idx[d] * in_strides[axes[d]];
    (*source)[i] = src;
    for (std::size_t d = r; d-- > 0;) {
      if (++idx[d] < out_shape[d]) break;
      idx[d] = 0;
    }
  }
  const auto xv = x.data();
  std::vector<Real> out(n);
  for (std::size_t i = 0; i < n; ++i) out[i] = xv[(*source)[i]];
  return record("permute", std::move(out_shape), std::move(out), {x},
                [source](const TensorImpl& o, Node& node) {
                  auto g = input_grad(node, 0);
                  for (std::size_t i = 0; i < o.grad.size(); ++i) g[(*source)[i]] += o.grad[i];
                });
}

Tensor embedding_lookup(const Tensor& table, std::span<const int> ids) {
  if (table.rank() != 2) fail(ErrorCode::kShape, "embedding_lookup: table must be rank 2, got " + shape_string(table.shape()));
  if (ids.empty()) fail(ErrorCode::kShape, "embedding_lookup: empty id list");
  const std::size_t rows = table.dim(0);
  const std::size_t d = table.dim(1);
  std::vector<int> index(ids.begin(), ids.end());
  std::vector<Real> out(index.size() * d);
  const auto tv = table.data();
  for (std::size_t i = 0; i < index.size(); ++i) {
    if (index[i] < 0 || static_cast<std::size_t>(index[i]) >= rows) {
      fail(ErrorCode::kRange, "embedding_lookup: id " + std::to_string(index[i]) +
                                  " outside table of " + std::to_string(rows) + " rows");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(index[i]) * d, d, out.data() + i * d);
  }
  const std::size_t count = index.size();
  return record("embedding_lookup", {count, d}, std::move(out), {table},
                [index = std::move(index), d](const TensorImpl& o, Node& node) {
                  auto g = input_grad(node, 0);
                  for (std::size_t i = 0; i < index.size(); ++i) {
                    Real* dst = g.data() + static_cast<std::size_t>(index[i]) * d;
                    const Real* src = o.grad.data() + i * d;
                    for (std::size_t j = 0; j < d; ++j) dst[j] += src[j];
                  }
                });
}

Tensor softmax(const Tensor& x, std::size_t axis) {
  const AxisSplit s = split_axis(x.shape(), axis, "softmax");
  const auto xv = x.data();
  std::vector<Real> out(x.numel());
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      Real mx = xv[base];
      for (std::size_t a = 1; a < s.extent; ++a) mx = std::max(mx, xv[base + a * s.inner]);
      Real total = 0;
      for (std::size_t a = 0; a < s.extent; ++a) {
        const Real e = std::exp(xv[base + a * s.inner] - mx);
        out[base + a * s.inner] = e;
        total += e;
      }
      for (std::size_t a = 0; a < s.extent; ++a) out[base + a * s.inner] /= total;
    }
  }
  return record("softmax", x.shape(), std::move(out), {x}, [s](const TensorImpl& o, Node& node) {
    auto g = input_grad(node, 0);
    const auto& y = o.data;
    for (std::size_t ou = 0; ou < s.outer; ++ou) {
      for (std::size_t in = 0; in < s.inner; ++in) {
        const std::size_t base = ou * s.extent * s.inner + in;
        Real dot = 0;
        for (std::size_t a = 0; a < s.extent; ++a) {
          const std::size_t i = base + a * s.inner;
          dot += o.grad[i] * y[i];
        }
        for (std::size_t a = 0; a < s.extent; ++a) {
          const std::size_t i = base + a * s.inner;
          g[i] += y[i] * (o.grad[i] - dot);
        }
      }
    }
  });
}

Tensor layer_norm(const Tensor& x, std::size_t axis, Real eps) {
  const AxisSplit s = split_axis(x.shape(), axis, "layer_norm");
  const auto xv = x.data();
  std::vector<Real> out(x.numel());
  auto inv_std = std::make_shared<std::vector<Real>>(s.outer * s.inner);
  const Real count = static_cast<Real>(s.extent);
  for (std::size_t o = 0; o < s.outer; ++o) {
    for (std::size_t in = 0; in < s.inner; ++in) {
      const std::size_t base = o * s.extent * s.inner + in;
      Real mu = 0;
      for (std::size_t a = 0; a < s.extent; ++a) mu += xv[base + a * s.inner];
      mu /= count;
      Real var = 0;
      for (std::size_t a = 0; a < s.extent; ++a) {
        const Real c = xv[base + a * s.inner] - mu;
        var += c * c;
      }
      var /= count;
      const Real r = Real(1) / std::sqrt(var + eps);
      (*inv_std)[o * s.inner + in] = r;
      for (std::size_t a = 0; a < s.extent; ++a) {
        out[base + a * s.inner] = (xv[base + a * s.inner] - mu) * r;
      }
    }
  }
  return record("layer_norm", x.shape(), std::move(out), {x},
                [s, inv_std, count](const TensorImpl& o, Node& node) {
                  auto g = input_grad(node, 0);
                  const auto& y = o.data;
                  for (std::size_t ou = 0; ou < s.outer; ++ou) {
                    for (std::size_t in = 0; in < s.inner; ++in) {
                      const std::size_t base = ou * s.extent * s.inner + in;
                      Real mean_dy = 0, mean_dy_y = 0;
                      for (std::size_t a = 0; a < s.extent; ++a) {
                        const std::size_t i = base + a * s.inner;
                        mean_dy += o.grad[i];
                        mean_dy_y += o.grad[i] * y[i];
                      }
                      mean_dy /= count;
                      mean_dy_y /= count;
                      const Real r = (*inv_std)[ou * s.inner + in];
                      for (std::size_t a = 0; a < s.extent; ++a) {
                        const std::size_t i = base + a * s.inner;
                        g[i] += r * (o.grad[i] - mean_dy - y[i] * mean_dy_y);
                      }
                    }
                  }
                });
}

Tensor layer_norm(const Tensor& x, const Tensor& gamma, const Tensor& beta, Real eps) {
  return scale_shift(layer_norm(x, x.rank() - 1, eps), gamma, beta);
}

Tensor gelu(const Tensor& x) {
  const auto xv = x.data();
  std::vector<Real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i] = Real(0.5) * xv[i] * (Real(1) + std::erf(xv[i] * Real(std::numbers::sqrt2 / 2)));
  }
  return record("gelu", x.shape(), std::move(out), {x}, [](const TensorImpl& o, Node& node) {
    const auto& xv = node.inputs[0]->data;
    auto g = input_grad(node, 0);
    const Real inv_sqrt_2pi = Real(0.5 * std::numbers::inv_sqrtpi * std::numbers::sqrt2);
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Real v = xv[i];
      const Real cdf = Real(0.5) * (Real(1) + std::erf(v * Real(std::numbers::sqrt2 / 2)));
      const Real pdf = inv_sqrt_2pi * std::exp(Real(-0.5) * v * v);
      g[i] += o.grad[i] * (cdf + v * pdf);
    }
  });
}

Tensor concat(const std::vector<Tensor>& parts, std::size_t axis) {
  if (parts.empty()) fail(ErrorCode::kShape, "concat: no inputs");
  const Shape& first = parts[0].shape();
  const AxisSplit s0 = split_axis(first, axis, "concat");
  std::vector<std::size_t> extents;
  std::size_t total = 0;
  for (const auto& p : parts) {
    const Shape& ps = p.shape();
    if (ps.size() != first.size()) shape_error("concat", first, ps);
    for (std::size_t i = 0; i < ps.size(); ++i) {
      if (i != axis && ps[i] != first[i]) shape_error("concat", first, ps);
    }
    extents.push_back(ps[axis]);
    total += ps[axis];
  }
  Shape out_shape = first;
  out_shape[axis] = total;
  std::vector<Real> out(shape_numel(out_shape));
  const std::size_t out_block = total * s0.inner;
  std::size_t offset = 0;
  for (std::size_t p = 0; p < parts.size(); ++p) {
    const std::size_t block = extents[p] * s0.inner;
    const auto pv = parts[p].data();
    for (std::size_t o = 0; o < s0.outer; ++o) {
      std::copy_n(pv.data() + o * block, block, out.data() + o * out_block + offset);
    }
    offset += block;
  }
  const std::size_t outer = s0.outer, inner = s0.inner;
  return record("concat", std::move(out_shape), std::move(out), parts,
                [extents, outer, inner, out_block](const TensorImpl& o, Node& node) {
                  std::size_t offset = 0;
                  for (std::size_t p = 0; p < extents.size(); ++p) {
                    const std::size_t block = extents[p] * inner;
                    auto g = input_grad(node, p);
                    if (!g.empty()) {
                      for (std::size_t ou = 0; ou < outer; ++ou) {
                        const Real* src = o.grad.data() + ou * out_block + offset;
                        Real* dst = g.data() + ou * block;
                        for (std::size_t i = 0; i < block; ++i) dst[i] += src[i];
                      }
                    }
                    offset += block;
                  }
                });
}

Tensor slice(const Tensor& x, std::size_t axis, std::size_t start, std::size_t length) {
  const AxisSplit s = split_axis(x.shape(), axis, "slice");
  if (length == 0 || start + length > s.extent) {
    fail(ErrorCode::kShape, "slice: range [" + std::to_string(start) + ", " +
                                std::to_string(start + length) + ") invalid for shape " +
                                shape_string(x.shape()));
  }
  Shape out_shape = x.shape();
  out_shape[axis] = length;
  const std::size_t in_block = s.extent * s.inner;
  const std::size_t out_block = length * s.inner;
  const std::size_t offset = start * s.inner;
  const auto xv = x.data();
  std::vector<Real> out(s.outer * out_block);
  for (std::size_t o = 0; o < s.outer; ++o) {
    std::copy_n(xv.data() + o * in_block + offset, out_block, out.data() + o * out_block);
  }
  return record("slice", std::move(out_shape), std::move(out), {x},
                [s, in_block, out_block, offset](const TensorImpl& o, Node& node) {
                  auto g = input_grad(node, 0);
                  for (std::size_t ou = 0; ou < s.outer; ++ou) {
                    for (std::size_t i = 0; i < out_block; ++i) {
                      g[ou * in_block + offset + i] += o.grad[ou * out_block + i];
                    }
                  }
                });
}

Tensor sum(const Tensor& x) {
  Real total = 0;
  for (Real v : x.data()) total += v;
  return record("sum", {1}, {total}, {x}, [](const TensorImpl& o, Node& node) {
    auto g = input_grad(node, 0);
    for (auto& v : g) v += o.grad[0];
  });
}

Tensor mean(const Tensor& x) { return scale(sum(x), Real(1) / static_cast<Real>(x.numel())); }

Tensor dropout(const Tensor& x, Real p, Rng& rng) {
  if (p <= 0) return x;
  if (p >= 1) fail(ErrorCode::kConfig, "dropout rate must be < 1");
  const Real keep_scale = Real(1) / (Real(1) - p);
  auto mask = std::make_shared<std::vector<Real>>(x.numel());
  for (auto& m : *mask) m = rng.uniform() < p ? Real(0) : keep_scale;
  const auto xv = x.data();
  std::vector<Real> out(x.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * (*mask)[i];
  return record("dropout", x.shape(), std::move(out), {x}, [mask](const TensorImpl& o, Node& node) {
    auto g = input_grad(node, 0);
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += o.grad[i] * (*mask)[i];
  });
}

Tensor mask_padded_keys(const Tensor& scores, std::span<const int> valid_lengths, std::size_t heads) {
  if (scores.rank() != 3 || heads == 0 || scores.dim(0) != valid_lengths.size() * heads) {
    fail(ErrorCode::kShape, "mask_padded_keys: scores " + shape_string(scores.shape()) +
                                " do not match " + std::to_string(valid_lengths.size()) +
                                " rows x " + std::to_string(heads) + " heads");
  }
  const std::size_t groups = scores.dim(0), queries = scores.dim(1), keys = scores.dim(2);
  std::vector<std::size_t> limit(groups);
  for (std::size_t g = 0; g < groups; ++g) {
    const int len = valid_lengths[g / heads];
    if (len < 1 || static_cast<std::size_t>(len) > keys) {
      fail(ErrorCode::kRange, "mask_padded_keys: valid length " + std::to_string(len) +
                                  " outside 1.." + std::to_string(keys));
    }
    limit[g] = static_cast<std::size_t>(len);
  }
  std::vector<Real> out(scores.data().begin(), scores.data().end());
  for (std::size_t g = 0; g < groups; ++g) {
    for (std::size_t q = 0; q < queries; ++q) {
      for (std::size_t k = limit[g]; k < keys; ++k) out[(g * queries + q) * keys + k] = Real(-1e9);
    }
  }
  return record("mask_padded_keys", scores.shape(), std::move(out), {scores},
                [limit, queries, keys](const TensorImpl& o, Node& node) {
                  auto g = input_grad(node, 0);
                  for (std::size_t gr = 0; gr < limit.size(); ++gr) {
                    for (std::size_t q = 0; q < queries; ++q) {
                      const std::size_t row = (gr * queries + q) * keys;
                      for (std::size_t k = 0; k < limit[gr]; ++k) g[row + k] += o.grad[row + k];
                    }
                  }
                });
}

Tensor linear(const Tensor& x, const Tensor& weight, const Tensor& bias) {
  return add_bias(matmul(x, weight), bias);
}

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
