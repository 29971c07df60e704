#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

// Numerics are compiled in 32-bit floats. Defining KDVQA_REAL_DOUBLE builds a
// 64-bit variant (used by the finite-difference gradient checks); the inline
// namespace keeps both variants linkable into one binary.
#if defined(KDVQA_REAL_DOUBLE)
#define KDVQA_REAL_NS real64
#else
#define KDVQA_REAL_NS real32
#endif

namespace kdvqa {
inline namespace KDVQA_REAL_NS {

#if defined(KDVQA_REAL_DOUBLE)
using Real = double;
inline constexpr std::string_view kRealDtype = "f64";
#else
using Real = float;
inline constexpr std::string_view kRealDtype = "f32";
#endif

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

struct TensorImpl;

// One recorded operation. `backward` reads the output gradient and
// accumulates into the gradients of `inputs`.
struct Node {
  std::uint64_t id = 0;
  std::vector<std::shared_ptr<TensorImpl>> inputs;
  std::function<void(const TensorImpl& out, Node& node)> backward;
};

struct TensorImpl {
  Shape shape;
  std::vector<Real> data;
  std::vector<Real> grad;  // empty until the first accumulation
  bool requires_grad = false;
  std::shared_ptr<Node> node;

  std::span<Real> grad_buffer();
};

}  // namespace detail

// Reference-semantics handle to an n-d array on the gradient tape. Copies
// share storage; `detach()` makes an independent copy without history.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<Real> data, bool requires_grad = false);

  static Tensor zeros(Shape shape, bool requires_grad = false);
  static Tensor full(Shape shape, Real value, bool requires_grad = false);
  static Tensor scalar(Real value, bool requires_grad = false);

  bool defined() const { return impl_ != nullptr; }

  const Shape& shape() const;
  std::size_t rank() const { return shape().size(); }
  std::size_t dim(std::size_t axis) const;
  std::size_t numel() const;

  std::span<Real> data();
  std::span<const Real> data() const;
  Real item() const;

  bool requires_grad() const;
  void set_requires_grad(bool value);
  bool has_grad() const;
  // Empty span when no gradient has been accumulated.
  std::span<Real> grad();
  std::span<const Real> grad() const;
  void zero_grad();

  // 0 for leaves; otherwise the position of the producing op on the tape.
  std::uint64_t node_id() const;

  // Reverse-mode sweep from this scalar. Gradients accumulate (+=) into every
  // reachable requires_grad tensor; the recorded graph is released afterwards.
  void backward();

  Tensor detach() const;

  bool same_storage(const Tensor& other) const { return impl_ == other.impl_; }

  const std::shared_ptr<detail::TensorImpl>& impl() const { return impl_; }
  explicit Tensor(std::shared_ptr<detail::TensorImpl> impl) : impl_(std::move(impl)) {}

 private:
  std::shared_ptr<detail::TensorImpl> impl_;
};

// While alive, ops on this thread record nothing on the tape.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

// When on, every op output and every backward gradient is scanned for NaN/Inf
// and the first offender raises Error(kNumeric).
void set_detect_anomaly(bool on);
bool detect_anomaly();
void check_finite(std::span<const Real> values, std::string_view what);

namespace detail {

using BackwardFn = std::function<void(const TensorImpl& out, Node& node)>;

// Wraps a freshly computed value; records a node when grad mode is on and
// some input requires grad.
Tensor record(std::string_view op, Shape shape, std::vector<Real> data,
              std::initializer_list<Tensor> inputs, BackwardFn backward);
Tensor record(std::string_view op, Shape shape, std::vector<Real> data,
              const std::vector<Tensor>& inputs, BackwardFn backward);

// Gradient buffer of input i if it takes gradients, else empty.
std::span<Real> input_grad(Node& node, std::size_t i);

}  // namespace detail

}  // namespace KDVQA_REAL_NS
}  // namespace kdvqa
