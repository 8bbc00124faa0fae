#include "mfpu/layers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "linalg.hpp"
#include "mfpu/errors.hpp"

namespace mfpu {

std::size_t ConvSpec::output_extent(std::size_t input_extent) const {
  require(kernel >= 1 && stride >= 1 && dilation >= 1, "conv: kernel, stride and dilation must be >= 1");
  const std::size_t padded = input_extent + 2 * padding;
  require(effective_kernel() <= padded,
          "conv: effective kernel " + std::to_string(effective_kernel()) + " exceeds padded input " +
              std::to_string(padded));
  return (padded - effective_kernel()) / stride + 1;
}

ConvSpec ConvSpec::same(std::size_t in, std::size_t out, std::size_t kernel, std::size_t dilation) {
  require(kernel % 2 == 1, "same padding needs an odd kernel");
  return ConvSpec{in, out, kernel, 1, dilation, dilation * (kernel - 1) / 2};
}

namespace {

template <class T>
void require_chw(const Tensor<T>& x, const char* op) {
  require(x.defined() && x.rank() == 3,
          std::string(op) + ": expected a C x H x W tensor, got " + (x.defined() ? shape_string(x.shape()) : "<undefined>"));
}

template <class T>
void add_bias_grad(detail::TensorNode<T>& bias, std::span<const T> grad, std::size_t channels, std::size_t plane) {
  auto g = bias.grad_slot();
  for (std::size_t o = 0; o < channels; ++o) {
    T acc = 0;
    for (std::size_t p = 0; p < plane; ++p) acc += grad[o * plane + p];
    g[o] += acc;
  }
}

}  // namespace

template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, const ConvSpec& spec) {
  require_chw(x, "conv2d");
  require(x.extent(0) == spec.in_channels, "conv2d: input has " + std::to_string(x.extent(0)) +
                                               " channels, spec expects " + std::to_string(spec.in_channels));
  require(weight.defined() && weight.shape() == spec.weight_shape(),
          "conv2d: weight shape must be " + shape_string(spec.weight_shape()));
  const bool has_bias = bias.defined();
  if (has_bias) require(bias.shape() == Shape{spec.out_channels}, "conv2d: bias must have out_channels entries");

  const linalg::PatchGeometry geo{spec.in_channels, x.extent(1),   x.extent(2),
                                  spec.kernel,      spec.stride,   spec.dilation,
                                  spec.padding,     spec.output_extent(x.extent(1)),
                                  spec.output_extent(x.extent(2))};
  const std::size_t k = geo.rows(), plane = geo.cols(), cout = spec.out_channels;

  std::vector<T> col(k * plane);
  linalg::im2col(geo, x.data().data(), col.data());
  std::vector<T> out(cout * plane, T(0));
  if (has_bias)
    for (std::size_t o = 0; o < cout; ++o) std::fill_n(out.begin() + o * plane, plane, bias[o]);
  linalg::gemm_nn(cout, plane, k, weight.data().data(), col.data(), out.data());

  std::vector<Tensor<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return detail::make_result<T>(
      {cout, geo.out_height, geo.out_width}, std::move(out), "conv2d", std::move(inputs),
      [geo, col = std::move(col), has_bias](detail::TensorNode<T>& self) {
        const std::size_t k = geo.rows(), plane = geo.cols();
        const std::size_t cout = self.shape[0];
        auto& xin = *self.inputs[0];
        auto& w = *self.inputs[1];
        const T* gout = self.grad.data();
        if (w.requires_grad) linalg::gemm_nt(cout, k, plane, gout, col.data(), w.grad_slot().data());
        if (has_bias && self.inputs[2]->requires_grad)
          add_bias_grad<T>(*self.inputs[2], self.grad, cout, plane);
        if (xin.requires_grad) {
          std::vector<T> dcol(k * plane, T(0));
          linalg::gemm_tn(k, plane, cout, w.data.data(), gout, dcol.data());
          linalg::col2im_add(geo, dcol.data(), xin.grad_slot().data());
        }
      });
}

template <class T>
Tensor<T> transposed_conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                            const ConvSpec& spec) {
  require_chw(x, "transposed_conv2d");
  require(x.extent(0) == spec.in_channels, "transposed_conv2d: input has " + std::to_string(x.extent(0)) +
                                               " channels, spec expects " + std::to_string(spec.in_channels));
  require(spec.dilation == 1 && spec.padding == 0, "transposed_conv2d: dilation 1 and zero padding only");
  require(spec.kernel >= 1 && spec.stride >= 1, "transposed_conv2d: kernel and stride must be >= 1");
  require(weight.defined() && weight.shape() == spec.transposed_weight_shape(),
          "transposed_conv2d: weight shape must be " + shape_string(spec.transposed_weight_shape()));
  const bool has_bias = bias.defined();
  if (has_bias)
    require(bias.shape() == Shape{spec.out_channels}, "transposed_conv2d: bias must have out_channels entries");

  const std::size_t h = x.extent(1), w = x.extent(2);
  const std::size_t ho = (h - 1) * spec.stride + spec.kernel, wo = (w - 1) * spec.stride + spec.kernel;
  // Patch geometry of the forward convolution this op is the adjoint of.
  const linalg::PatchGeometry geo{spec.out_channels, ho, wo, spec.kernel, spec.stride, 1, 0, h, w};
  const std::size_t cin = spec.in_channels, k = geo.rows(), plane = h * w;

  std::vector<T> col(k * plane, T(0));
  linalg::gemm_tn(k, plane, cin, weight.data().data(), x.data().data(), col.data());
  std::vector<T> out(spec.out_channels * ho * wo, T(0));
  if (has_bias)
    for (std::size_t o = 0; o < spec.out_channels; ++o) std::fill_n(out.begin() + o * ho * wo, ho * wo, bias[o]);
  linalg::col2im_add(geo, col.data(), out.data());

  std::vector<Tensor<T>> inputs{x, weight};
  if (has_bias) inputs.push_back(bias);
  return detail::make_result<T>(
      {spec.out_channels, ho, wo}, std::move(out), "transposed_conv2d", std::move(inputs),
      [geo, cin, has_bias](detail::TensorNode<T>& self) {
        const std::size_t k = geo.rows(), plane = geo.cols();
        auto& xin = *self.inputs[0];
        auto& wt = *self.inputs[1];
        std::vector<T> dcol(k * plane);
        linalg::im2col(geo, self.grad.data(), dcol.data());
        if (xin.requires_grad) linalg::gemm_nn(cin, plane, k, wt.data.data(), dcol.data(), xin.grad_slot().data());
        if (wt.requires_grad) linalg::gemm_nt(cin, k, plane, xin.data.data(), dcol.data(), wt.grad_slot().data());
        if (has_bias && self.inputs[2]->requires_grad)
          add_bias_grad<T>(*self.inputs[2], self.grad, geo.channels, geo.height * geo.width);
      });
}

template <class T>
Tensor<T> relu(const Tensor<T>& x) {
  std::vector<T> out(x.data().begin(), x.data().end());
  for (auto& v : out) v = v > T(0) ? v : T(0);
  return detail::make_result<T>(x.shape(), std::move(out), "relu", {x}, [](detail::TensorNode<T>& self) {
    auto& in = *self.inputs[0];
    auto g = in.grad_slot();
    for (std::size_t i = 0; i < g.size(); ++i)
      if (in.data[i] > T(0)) g[i] += self.grad[i];
  });
}

template <class T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t window) {
  require_chw(x, "max_pool2d");
  require(window >= 1, "max_pool2d: window must be >= 1");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  require(h % window == 0 && w % window == 0,
          "max_pool2d: extent " + shape_string(x.shape()) + " not divisible by window " + std::to_string(window));
  const std::size_t ho = h / window, wo = w / window;
  std::vector<T> out(c * ho * wo);
  std::vector<std::size_t> argmax(out.size());
  const auto xd = x.data();
  for (std::size_t ch = 0; ch < c; ++ch) {
    for (std::size_t i = 0; i < ho; ++i) {
      for (std::size_t j = 0; j < wo; ++j) {
        std::size_t best = (ch * h + i * window) * w + j * window;
        for (std::size_t a = 0; a < window; ++a) {
          for (std::size_t b = 0; b < window; ++b) {
            const std::size_t idx = (ch * h + i * window + a) * w + j * window + b;
            if (xd[idx] > xd[best]) best = idx;
          }
        }
        const std::size_t o = (ch * ho + i) * wo + j;
        out[o] = xd[best];
        argmax[o] = best;
      }
    }
  }
  return detail::make_result<T>({c, ho, wo}, std::move(out), "max_pool2d", {x},
                                [argmax = std::move(argmax)](detail::TensorNode<T>& self) {
                                  auto g = self.inputs[0]->grad_slot();
                                  for (std::size_t o = 0; o < argmax.size(); ++o) g[argmax[o]] += self.grad[o];
                                });
}

template <class T>
Tensor<T> upsample_nearest(const Tensor<T>& x, std::size_t factor) {
  require_chw(x, "upsample_nearest");
  require(factor >= 1, "upsample_nearest: factor must be >= 1");
  const std::size_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const std::size_t ho = h * factor, wo = w * factor;
  std::vector<T> out(c * ho * wo);
  const auto xd = x.data();
  for (std::size_t ch = 0; ch < c; ++ch)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j) out[(ch * ho + i) * wo + j] = xd[(ch * h + i / factor) * w + j / factor];
  return detail::make_result<T>({c, ho, wo}, std::move(out), "upsample_nearest", {x},
                                [factor](detail::TensorNode<T>& self) {
                                  auto& in = *self.inputs[0];
                                  const std::size_t c = in.shape[0], h = in.shape[1], w = in.shape[2];
                                  const std::size_t ho = h * factor, wo = w * factor;
                                  auto g = in.grad_slot();
                                  for (std::size_t ch = 0; ch < c; ++ch)
                                    for (std::size_t i = 0; i < ho; ++i)
                                      for (std::size_t j = 0; j < wo; ++j)
                                        g[(ch * h + i / factor) * w + j / factor] += self.grad[(ch * ho + i) * wo + j];
                                });
}

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs) {
  require(!xs.empty(), "concat_channels: no inputs");
  for (const auto& x : xs) require_chw(x, "concat_channels");
  const std::size_t h = xs.front().extent(1), w = xs.front().extent(2);
  std::size_t channels = 0;
  for (const auto& x : xs) {
    require(x.extent(1) == h && x.extent(2) == w, "concat_channels: spatial mismatch " +
                                                      shape_string(xs.front().shape()) + " vs " + shape_string(x.shape()));
    channels += x.extent(0);
  }
  std::vector<T> out;
  out.reserve(channels * h * w);
  for (const auto& x : xs) out.insert(out.end(), x.data().begin(), x.data().end());
  return detail::make_result<T>({channels, h, w}, std::move(out), "concat_channels", xs,
                                [](detail::TensorNode<T>& self) {
                                  std::size_t offset = 0;
                                  for (auto& in : self.inputs) {
                                    const std::size_t n = in->data.size();
                                    if (in->requires_grad) {
                                      auto g = in->grad_slot();
                                      for (std::size_t i = 0; i < n; ++i) g[i] += self.grad[offset + i];
                                    }
                                    offset += n;
                                  }
                                });
}

template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count) {
  require_chw(x, "slice_channels");
  require(count >= 1 && begin + count <= x.extent(0), "slice_channels: channel range out of bounds");
  const std::size_t plane = x.extent(1) * x.extent(2);
  std::vector<T> out(x.data().begin() + begin * plane, x.data().begin() + (begin + count) * plane);
  return detail::make_result<T>({count, x.extent(1), x.extent(2)}, std::move(out), "slice_channels", {x},
                                [offset = begin * plane](detail::TensorNode<T>& self) {
                                  auto g = self.inputs[0]->grad_slot();
                                  for (std::size_t i = 0; i < self.grad.size(); ++i) g[offset + i] += self.grad[i];
                                });
}

template <class T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::uint8_t> target) {
  require_chw(logits, "softmax_cross_entropy");
  const std::size_t c = logits.extent(0), plane = logits.extent(1) * logits.extent(2);
  require(c >= 2, "softmax_cross_entropy: need at least two channels");
  require(target.size() == plane, "softmax_cross_entropy: target has " + std::to_string(target.size()) +
                                      " pixels, logits have " + std::to_string(plane));
  for (auto t : target)
    require(t < c, c == 2 ? "softmax_cross_entropy: target mask must be binary {0, 1}"
                          : "softmax_cross_entropy: target class out of range");

  const auto z = logits.data();
  std::vector<T> prob(c * plane);
  double total = 0.0;
  for (std::size_t p = 0; p < plane; ++p) {
    T peak = z[p];
    for (std::size_t ch = 1; ch < c; ++ch) peak = std::max(peak, z[ch * plane + p]);
    T denom = 0;
    for (std::size_t ch = 0; ch < c; ++ch) {
      const T e = std::exp(z[ch * plane + p] - peak);
      prob[ch * plane + p] = e;
      denom += e;
    }
    for (std::size_t ch = 0; ch < c; ++ch) prob[ch * plane + p] /= denom;
    total += -(static_cast<double>(z[target[p] * plane + p] - peak) - std::log(static_cast<double>(denom)));
  }
  const T loss = static_cast<T>(total / static_cast<double>(plane));
  std::vector<std::uint8_t> labels(target.begin(), target.end());
  return detail::make_result<T>(
      {1}, {loss}, "softmax_cross_entropy", {logits},
      [prob = std::move(prob), labels = std::move(labels), c, plane](detail::TensorNode<T>& self) {
        auto g = self.inputs[0]->grad_slot();
        const T s = self.grad[0] / static_cast<T>(plane);
        for (std::size_t ch = 0; ch < c; ++ch)
          for (std::size_t p = 0; p < plane; ++p)
            g[ch * plane + p] += s * (prob[ch * plane + p] - (labels[p] == ch ? T(1) : T(0)));
      });
}

template <class T>
std::vector<std::uint8_t> argmax_channels(const Tensor<T>& logits) {
  require_chw(logits, "argmax_channels");
  const std::size_t c = logits.extent(0), plane = logits.extent(1) * logits.extent(2);
  const auto z = logits.data();
  std::vector<std::uint8_t> out(plane, 0);
  for (std::size_t p = 0; p < plane; ++p) {
    std::size_t best = 0;
    for (std::size_t ch = 1; ch < c; ++ch)
      if (z[ch * plane + p] > z[best * plane + p]) best = ch;
    out[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

#define MFPU_INSTANTIATE(T)                                                                                  \
  template Tensor<T> conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&, const ConvSpec&);       \
  template Tensor<T> transposed_conv2d<T>(const Tensor<T>&, const Tensor<T>&, const Tensor<T>&,              \
                                          const ConvSpec&);                                                  \
  template Tensor<T> relu<T>(const Tensor<T>&);                                                              \
  template Tensor<T> max_pool2d<T>(const Tensor<T>&, std::size_t);                                           \
  template Tensor<T> upsample_nearest<T>(const Tensor<T>&, std::size_t);                                     \
  template Tensor<T> concat_channels<T>(const std::vector<Tensor<T>>&);                                      \
  template Tensor<T> slice_channels<T>(const Tensor<T>&, std::size_t, std::size_t);                          \
  template Tensor<T> softmax_cross_entropy<T>(const Tensor<T>&, std::span<const std::uint8_t>);              \
  template std::vector<std::uint8_t> argmax_channels<T>(const Tensor<T>&);

MFPU_INSTANTIATE(float)
MFPU_INSTANTIATE(double)

#undef MFPU_INSTANTIATE

}  // namespace mfpu
