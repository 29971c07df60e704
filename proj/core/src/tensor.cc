#include "kdvqa/tensor.h"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <unordered_set>

#include "kdvqa/error.h"

namespace kdvqa {
inline namespace KDVQA_REAL_NS {
namespace {

std::atomic<std::uint64_t> g_next_node_id{1};
std::atomic<bool> g_detect_anomaly{false};
thread_local bool t_grad_enabled = true;

std::shared_ptr<detail::TensorImpl> make_impl(Shape shape, std::vector<Real> data,
                                              bool requires_grad) {
  if (data.size() != shape_numel(shape)) {
    fail(ErrorCode::kShape, "tensor data length " + std::to_string(data.size()) +
                                " does not match shape " + shape_string(shape));
  }
  for (std::size_t extent : shape) {
    if (extent == 0) fail(ErrorCode::kShape, "tensor extents must be positive: " + shape_string(shape));
  }
  auto impl = std::make_shared<detail::TensorImpl>();
  impl->shape = std::move(shape);
  impl->data = std::move(data);
  impl->requires_grad = requires_grad;
  return impl;
}

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t e : shape) n *= e;
  return n;
}

std::string shape_string(const Shape& shape) {
  std::string s = "[";
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i > 0) s += ", ";
    s += std::to_string(shape[i]);
  }
  return s + "]";
}

std::span<Real> detail::TensorImpl::grad_buffer() {
  if (grad.empty()) grad.assign(data.size(), Real(0));
  return grad;
}

Tensor::Tensor(Shape shape, std::vector<Real> data, bool requires_grad)
    : impl_(make_impl(std::move(shape), std::move(data), requires_grad)) {}

Tensor Tensor::zeros(Shape shape, bool requires_grad) { return full(std::move(shape), 0, requires_grad); }

Tensor Tensor::full(Shape shape, Real value, bool requires_grad) {
  const std::size_t n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<Real>(n, value), requires_grad);
}

Tensor Tensor::scalar(Real value, bool requires_grad) { return Tensor({1}, {value}, requires_grad); }

const Shape& Tensor::shape() const { return impl_->shape; }

std::size_t Tensor::dim(std::size_t axis) const {
  if (axis >= rank()) {
    fail(ErrorCode::kShape, "axis " + std::to_string(axis) + " out of range for shape " +
                                shape_string(shape()));
  }
  return impl_->shape[axis];
}

std::size_t Tensor::numel() const { return impl_->data.size(); }

std::span<Real> Tensor::data() { return impl_->data; }
std::span<const Real> Tensor::data() const { return impl_->data; }

Real Tensor::item() const {
  if (numel() != 1) fail(ErrorCode::kShape, "item() on tensor of shape " + shape_string(shape()));
  return impl_->data[0];
}

bool Tensor::requires_grad() const { return impl_->requires_grad; }
void Tensor::set_requires_grad(bool value) { impl_->requires_grad = value; }
bool Tensor::has_grad() const { return !impl_->grad.empty(); }
std::span<Real> Tensor::grad() { return impl_->grad; }
std::span<const Real> Tensor::grad() const { return impl_->grad; }
void Tensor::zero_grad() { impl_->grad.clear(); }

std::uint64_t Tensor::node_id() const { return impl_->node ? impl_->node->id : 0; }

Tensor Tensor::detach() const { return Tensor(impl_->shape, impl_->data, false); }

void Tensor::backward() {
  if (numel() != 1) {
    fail(ErrorCode::kShape, "backward() needs a scalar loss, got shape " + shape_string(shape()));
  }
  if (!impl_->requires_grad) {
    fail(ErrorCode::kPrecondition, "backward() on a tensor that does not require grad");
  }
  // Node ids grow with recording order, so descending id is a valid reverse
  // topological order.
  std::vector<detail::TensorImpl*> order;
  std::unordered_set<detail::TensorImpl*> seen;
  std::vector<detail::TensorImpl*> stack = {impl_.get()};
  while (!stack.empty()) {
    detail::TensorImpl* t = stack.back();
    stack.pop_back();
    if (!t->node || !seen.insert(t).second) continue;
    order.push_back(t);
    for (const auto& in : t->node->inputs) stack.push_back(in.get());
  }
  std::sort(order.begin(), order.end(),
            [](const auto* a, const auto* b) { return a->node->id > b->node->id; });

  impl_->grad_buffer()[0] += Real(1);
  const bool anomaly = detect_anomaly();
  for (detail::TensorImpl* t : order) {
    if (t->grad.empty()) continue;
    t->node->backward(*t, *t->node);
    if (anomaly) {
      for (const auto& in : t->node->inputs) {
        if (!in->grad.empty()) check_finite(in->grad, "gradient");
      }
    }
  }
  // Detach every node before any is destroyed: a node owns its inputs, so
  // releasing one can free tensors later in `order`.
  std::vector<std::shared_ptr<detail::Node>> released;
  released.reserve(order.size());
  for (detail::TensorImpl* t : order) released.push_back(std::move(t->node));
}

NoGradGuard::NoGradGuard() : previous_(t_grad_enabled) { t_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { t_grad_enabled = previous_; }

bool grad_enabled() { return t_grad_enabled; }

void set_detect_anomaly(bool on) { g_detect_anomaly.store(on); }
bool detect_anomaly() { return g_detect_anomaly.load(std::memory_order_relaxed); }

void check_finite(std::span<const Real> values, std::string_view what) {
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (!std::isfinite(values[i])) {
      fail(ErrorCode::kNumeric, "non-finite " + std::string(what) + " at element " + std::to_string(i));
    }
  }
}

namespace detail {

Tensor record(std::string_view op, Shape shape, std::vector<Real> data,
              const std::vector<Tensor>& inputs, BackwardFn backward) {
  auto impl = make_impl(std::move(shape), std::move(data), false);
  if (detect_anomaly()) check_finite(impl->data, std::string(op) + " output");
  if (grad_enabled()) {
    const bool needs = std::any_of(inputs.begin(), inputs.end(),
                                   [](const Tensor& t) { return t.requires_grad(); });
    if (needs) {
      auto node = std::make_shared<Node>();
      node->id = g_next_node_id.fetch_add(1);
      for (const auto& t : inputs) node->inputs.push_back(t.impl());
      node->backward = std::move(backward);
      impl->requires_grad = true;
      impl->node = std::move(node);
    }
  }
  return Tensor(std::move(impl));
}

Tensor record(std::string_view op, Shape shape, std::vector<Real> data,
              std::initializer_list<Tensor> inputs, BackwardFn backward) {
  return record(op, std::move(shape), std::move(data), std::vector<Tensor>(inputs),
                std::move(backward));
}

std::span<Real> input_grad(Node& node, std::size_t i) {
  auto& in = node.inputs[i];
  if (!in->requires_grad) return {};
  return in->grad_buffer();
}

}  // namespace detail
}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
