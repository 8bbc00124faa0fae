#pragma once

// Dense row-major tensor with a reverse-mode tape.
//
// A Tensor is a shared handle: copies alias the same storage. Every operation
// whose inputs require gradients records a tape entry on its result (op name,
// input handles, backward closure). backward() walks those entries from a
// scalar loss in reverse topological order and accumulates into grad slots.
//
// The scalar type is the numeric profile: Tensor<double> for gradient checks
// and oracles, Tensor<float> for training.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace mfpu {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_string(const Shape& shape);

namespace detail {

template <class T>
struct TensorNode {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;  // empty until the first accumulation
  bool requires_grad = false;

  std::string_view op = "leaf";
  std::vector<std::shared_ptr<TensorNode>> inputs;
  std::function<void(TensorNode&)> backward;

  std::span<T> grad_slot();
};

}  // namespace detail

template <class T>
class Tensor {
 public:
  using value_type = T;
  using Node = detail::TensorNode<T>;

  Tensor() = default;
  explicit Tensor(Shape shape, T fill = T(0));
  Tensor(Shape shape, std::vector<T> values);

  // Leaf that participates in differentiation.
  static Tensor parameter(Shape shape, std::vector<T> values);

  bool defined() const { return node_ != nullptr; }
  const Shape& shape() const { return node_->shape; }
  std::size_t rank() const { return node_->shape.size(); }
  std::size_t extent(std::size_t axis) const { return node_->shape.at(axis); }
  std::size_t numel() const { return node_->data.size(); }

  std::span<T> data() { return node_->data; }
  std::span<const T> data() const { return node_->data; }
  T& operator[](std::size_t i) { return node_->data[i]; }
  const T& operator[](std::size_t i) const { return node_->data[i]; }
  T item() const;

  bool requires_grad() const { return node_->requires_grad; }
  void set_requires_grad(bool value) { node_->requires_grad = value; }
  bool has_grad() const { return !node_->grad.empty(); }
  std::span<const T> grad() const { return node_->grad; }
  std::span<T> mutable_grad() { return node_->grad; }
  void clear_grad();

  std::string_view op() const { return node_->op; }
  bool is_leaf() const { return !node_->backward; }

  // Same values, fresh leaf without tape history or gradient.
  Tensor detach() const;

  const std::shared_ptr<Node>& node() const { return node_; }
  explicit Tensor(std::shared_ptr<Node> node) : node_(std::move(node)) {}

 private:
  std::shared_ptr<Node> node_;
};

using Tensor64 = Tensor<double>;
using Tensor32 = Tensor<float>;

namespace detail {

// Allocates the result of an op. If any input requires gradients the result
// is taped with `backward`; otherwise the closure is dropped.
template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::string_view op,
                      std::vector<Tensor<T>> inputs, std::function<void(TensorNode<T>&)> backward);

}  // namespace detail

// While alive on this thread, ops record no tape (inference).
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

// Seeds d(loss)/d(loss) = 1 and propagates through the tape.
template <class T>
void backward(const Tensor<T>& loss);

template <class T>
Tensor<T> sum(const Tensor<T>& x);
template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b);
template <class T>
Tensor<T> scale(const Tensor<T>& x, T factor);
template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape);

struct GradCheckOptions {
  // 0 checks every coordinate; otherwise a seeded random subset of this size.
  std::size_t max_coordinates = 0;
  std::uint64_t seed = 0;
};

// Max over checked coordinates of |g_ad - g_fd| / max(1, |g_ad|, |g_fd|),
// with g_fd the central difference of f at theta +/- eps. theta is perturbed
// in place and restored; f may read it through any alias.
double grad_check(const std::function<Tensor64(const Tensor64&)>& f, Tensor64 theta, double eps,
                  const GradCheckOptions& options = {});

}  // namespace mfpu
