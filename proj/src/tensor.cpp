#include "mfpu/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "mfpu/errors.hpp"

namespace mfpu {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_string(const Shape& shape) {
  std::ostringstream out;
  out << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) out << (i ? "x" : "") << shape[i];
  out << ']';
  return out.str();
}

namespace {

void check_shape(const Shape& shape) {
  require(!shape.empty(), "tensor shape must have at least one extent");
  for (auto e : shape) require(e > 0, "tensor extents must be positive, got " + shape_string(shape));
}

}  // namespace

namespace {
thread_local bool tape_enabled = true;
}  // namespace

NoGradGuard::NoGradGuard() : previous_(tape_enabled) { tape_enabled = false; }
NoGradGuard::~NoGradGuard() { tape_enabled = previous_; }
bool grad_enabled() { return tape_enabled; }

namespace detail {

template <class T>
std::span<T> TensorNode<T>::grad_slot() {
  if (grad.empty()) grad.assign(data.size(), T(0));
  return grad;
}

template <class T>
Tensor<T> make_result(Shape shape, std::vector<T> values, std::string_view op,
                      std::vector<Tensor<T>> inputs, std::function<void(TensorNode<T>&)> backward) {
  Tensor<T> out(std::move(shape), std::move(values));
  const bool taped = tape_enabled && std::any_of(inputs.begin(), inputs.end(),
                                 [](const Tensor<T>& t) { return t.requires_grad(); });
  auto& node = *out.node();
  node.op = op;
  if (taped) {
    node.requires_grad = true;
    node.inputs.reserve(inputs.size());
    for (auto& t : inputs) node.inputs.push_back(t.node());
    node.backward = std::move(backward);
  }
  return out;
}

}  // namespace detail

template <class T>
Tensor<T>::Tensor(Shape shape, T fill) : node_(std::make_shared<Node>()) {
  check_shape(shape);
  node_->data.assign(shape_numel(shape), fill);
  node_->shape = std::move(shape);
}

template <class T>
Tensor<T>::Tensor(Shape shape, std::vector<T> values) : node_(std::make_shared<Node>()) {
  check_shape(shape);
  require(values.size() == shape_numel(shape),
          "value count " + std::to_string(values.size()) + " does not match shape " + shape_string(shape));
  node_->shape = std::move(shape);
  node_->data = std::move(values);
}

template <class T>
Tensor<T> Tensor<T>::parameter(Shape shape, std::vector<T> values) {
  Tensor t(std::move(shape), std::move(values));
  t.set_requires_grad(true);
  return t;
}

template <class T>
T Tensor<T>::item() const {
  require(numel() == 1, "item() requires a single-element tensor, shape is " + shape_string(shape()));
  return node_->data[0];
}

template <class T>
void Tensor<T>::clear_grad() {
  node_->grad.clear();
  node_->grad.shrink_to_fit();
}

template <class T>
Tensor<T> Tensor<T>::detach() const {
  return Tensor(node_->shape, node_->data);
}

template <class T>
void backward(const Tensor<T>& loss) {
  using Node = detail::TensorNode<T>;
  require(loss.defined() && loss.numel() == 1,
          "backward() requires a scalar loss, got shape " + (loss.defined() ? shape_string(loss.shape()) : "<undefined>"));
  require(loss.requires_grad(), "backward() on a loss that does not depend on any differentiable tensor");

  // Iterative post-order DFS; `order` ends up topologically sorted with
  // inputs before consumers.
  enum class Mark { Visiting, Done };
  std::unordered_map<Node*, Mark> marks;
  std::vector<Node*> order;
  std::vector<std::pair<Node*, std::size_t>> stack{{loss.node().get(), 0}};
  marks[loss.node().get()] = Mark::Visiting;
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].get();
      if (!child->requires_grad) continue;
      auto it = marks.find(child);
      if (it == marks.end()) {
        marks.emplace(child, Mark::Visiting);
        stack.emplace_back(child, 0);
      } else if (it->second == Mark::Visiting) {
        throw std::logic_error("internal error: cycle in autograd tape");
      }
    } else {
      marks[node] = Mark::Done;
      order.push_back(node);
      stack.pop_back();
    }
  }

  auto seed = loss.node()->grad_slot();
  seed[0] = T(1);
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    Node* node = *it;
    if (node->backward && !node->grad.empty()) node->backward(*node);
  }
}

template <class T>
Tensor<T> sum(const Tensor<T>& x) {
  T acc = 0;
  for (T v : x.data()) acc += v;
  return detail::make_result<T>({1}, {acc}, "sum", {x}, [](detail::TensorNode<T>& self) {
    auto& in = *self.inputs[0];
    if (!in.requires_grad) return;
    const T g = self.grad[0];
    for (auto& v : in.grad_slot()) v += g;
  });
}

template <class T>
Tensor<T> add(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "add: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] + b[i];
  return detail::make_result<T>(a.shape(), std::move(out), "add", {a, b}, [](detail::TensorNode<T>& self) {
    for (auto& in : self.inputs) {
      if (!in->requires_grad) continue;
      auto g = in->grad_slot();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
    }
  });
}

template <class T>
Tensor<T> mul(const Tensor<T>& a, const Tensor<T>& b) {
  require(a.shape() == b.shape(), "mul: shape mismatch " + shape_string(a.shape()) + " vs " + shape_string(b.shape()));
  std::vector<T> out(a.numel());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = a[i] * b[i];
  return detail::make_result<T>(a.shape(), std::move(out), "mul", {a, b}, [](detail::TensorNode<T>& self) {
    auto& lhs = *self.inputs[0];
    auto& rhs = *self.inputs[1];
    // Read values before touching grad slots: lhs and rhs may be the same node.
    if (lhs.requires_grad) {
      auto g = lhs.grad_slot();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * rhs.data[i];
    }
    if (rhs.requires_grad) {
      auto g = rhs.grad_slot();
      for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i] * lhs.data[i];
    }
  });
}

template <class T>
Tensor<T> scale(const Tensor<T>& x, T factor) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v *= factor;
  return detail::make_result<T>(x.shape(), std::move(out), "scale", {x}, [factor](detail::TensorNode<T>& self) {
    auto g = self.inputs[0]->grad_slot();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += factor * self.grad[i];
  });
}

template <class T>
Tensor<T> reshape(const Tensor<T>& x, Shape shape) {
  require(shape_numel(shape) == x.numel(),
          "reshape: " + shape_string(x.shape()) + " cannot become " + shape_string(shape));
  std::vector<T> out(x.data().begin(), x.data().end());
  return detail::make_result<T>(std::move(shape), std::move(out), "reshape", {x}, [](detail::TensorNode<T>& self) {
    auto g = self.inputs[0]->grad_slot();
    for (std::size_t i = 0; i < g.size(); ++i) g[i] += self.grad[i];
  });
}

double grad_check(const std::function<Tensor64(const Tensor64&)>& f, Tensor64 theta, double eps,
                  const GradCheckOptions& options) {
  require(eps > 0, "grad_check: step must be positive");
  require(theta.defined(), "grad_check: undefined parameter tensor");
  theta.set_requires_grad(true);
  theta.clear_grad();
  Tensor64 loss = f(theta);
  backward(loss);
  std::vector<double> analytic(theta.numel(), 0.0);
  if (theta.has_grad()) std::copy(theta.grad().begin(), theta.grad().end(), analytic.begin());

  std::vector<std::size_t> coords(theta.numel());
  std::iota(coords.begin(), coords.end(), std::size_t{0});
  if (options.max_coordinates > 0 && options.max_coordinates < coords.size()) {
    std::mt19937_64 rng(options.seed);
    std::shuffle(coords.begin(), coords.end(), rng);
    coords.resize(options.max_coordinates);
    std::sort(coords.begin(), coords.end());
  }

  // The finite-difference passes need values only.
  theta.set_requires_grad(false);
  double worst = 0.0;
  for (std::size_t i : coords) {
    const double saved = theta[i];
    theta[i] = saved + eps;
    const double up = f(theta).item();
    theta[i] = saved - eps;
    const double down = f(theta).item();
    theta[i] = saved;
    const double fd = (up - down) / (2.0 * eps);
    const double ad = analytic[i];
    const double err = std::abs(ad - fd) / std::max({1.0, std::abs(ad), std::abs(fd)});
    worst = std::max(worst, err);
  }
  theta.set_requires_grad(true);
  theta.clear_grad();
  return worst;
}

#define MFPU_INSTANTIATE(T)                                                                   \
  template struct detail::TensorNode<T>;                                                      \
  template class Tensor<T>;                                                                   \
  template Tensor<T> detail::make_result<T>(Shape, std::vector<T>, std::string_view,          \
                                            std::vector<Tensor<T>>,                           \
                                            std::function<void(detail::TensorNode<T>&)>);     \
  template void backward<T>(const Tensor<T>&);                                                \
  template Tensor<T> sum<T>(const Tensor<T>&);                                                \
  template Tensor<T> add<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> mul<T>(const Tensor<T>&, const Tensor<T>&);                              \
  template Tensor<T> scale<T>(const Tensor<T>&, T);                                           \
  template Tensor<T> reshape<T>(const Tensor<T>&, Shape);

MFPU_INSTANTIATE(float)
MFPU_INSTANTIATE(double)

#undef MFPU_INSTANTIATE

}  // namespace mfpu
