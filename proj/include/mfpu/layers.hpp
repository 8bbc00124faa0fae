#pragma once

// Layer primitives on channels-first C x H x W tensors.

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "mfpu/tensor.hpp"

namespace mfpu {

// Geometry of a square-kernel convolution. Weight layout is
// out x in x m x m for conv2d and in x out x m x m for transposed_conv2d.
struct ConvSpec {
  std::size_t in_channels = 1;
  std::size_t out_channels = 1;
  std::size_t kernel = 3;
  std::size_t stride = 1;
  std::size_t dilation = 1;
  std::size_t padding = 0;

  std::size_t effective_kernel() const { return dilation * (kernel - 1) + 1; }
  // Throws ContractViolation when the kernel does not fit the padded input.
  std::size_t output_extent(std::size_t input_extent) const;
  Shape weight_shape() const { return {out_channels, in_channels, kernel, kernel}; }
  Shape transposed_weight_shape() const { return {in_channels, out_channels, kernel, kernel}; }

  // Zero padding that keeps the extent unchanged at stride 1.
  static ConvSpec same(std::size_t in, std::size_t out, std::size_t kernel, std::size_t dilation = 1);
};

// out[o,i,j] = bias[o] + sum_{c,a,b} w[o,c,a,b] * x[c, i*s + a*d - p, j*s + b*d - p]
// on the zero-padded input. `bias` may be undefined.
template <class T>
Tensor<T> conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias, const ConvSpec& spec);

// Adjoint of conv2d with the same weight array: every input element scatters
// weight * value into its m x m output window; overlaps sum. Output extent is
// (H - 1) * stride + kernel. Requires dilation 1 and no padding.
template <class T>
Tensor<T> transposed_conv2d(const Tensor<T>& x, const Tensor<T>& weight, const Tensor<T>& bias,
                            const ConvSpec& spec);

template <class T>
Tensor<T> relu(const Tensor<T>& x);

// Non-overlapping window x window max; ties go to the first element in
// row-major order within the block.
template <class T>
Tensor<T> max_pool2d(const Tensor<T>& x, std::size_t window = 2);

template <class T>
Tensor<T> upsample_nearest(const Tensor<T>& x, std::size_t factor);

template <class T>
Tensor<T> concat_channels(const std::vector<Tensor<T>>& xs);

template <class T>
Tensor<T> slice_channels(const Tensor<T>& x, std::size_t begin, std::size_t count);

// Mean over pixels of -log softmax(logits)[target]. logits is C x H x W and
// target holds H * W class indices; with C == 2 the target must be binary.
template <class T>
Tensor<T> softmax_cross_entropy(const Tensor<T>& logits, std::span<const std::uint8_t> target);

// Per-pixel argmax over channels (first channel wins ties).
template <class T>
std::vector<std::uint8_t> argmax_channels(const Tensor<T>& logits);

}  // namespace mfpu
