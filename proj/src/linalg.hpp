#pragma once

// Row-major GEMM variants and im2col built on the dispatched kernels.

#include <cstddef>
#include <vector>

#include "mfpu/kernels.hpp"

namespace mfpu::linalg {

// C[M x N] += A[M x K] * B[K x N]
template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  kernels::active<T>().gemm_nn(m, n, k, a, k, b, n, c, n);
}

// C[M x N] += A[M x K] * B[N x K]^T
template <class T>
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  const auto& kt = kernels::active<T>();
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) c[i * n + j] += kt.dot(k, a + i * k, b + j * k);
}

// C[M x N] += A[K x M]^T * B[K x N]
template <class T>
void gemm_tn(std::size_t m, std::size_t n, std::size_t k, const T* a, const T* b, T* c) {
  std::vector<T> at(m * k);
  for (std::size_t p = 0; p < k; ++p)
    for (std::size_t i = 0; i < m; ++i) at[i * k + p] = a[p * m + i];
  gemm_nn(m, n, k, at.data(), b, c);
}

struct PatchGeometry {
  std::size_t channels, height, width;    // input image
  std::size_t kernel, stride, dilation, padding;
  std::size_t out_height, out_width;
  std::size_t rows() const { return channels * kernel * kernel; }
  std::size_t cols() const { return out_height * out_width; }
};

// col[(c*m + a)*m + b][i*Wo + j] = x[c, i*s + a*d - p, j*s + b*d - p] (0 outside)
template <class T>
void im2col(const PatchGeometry& g, const T* x, T* col) {
  const long h = static_cast<long>(g.height), w = static_cast<long>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    const T* xc = x + c * g.height * g.width;
    for (std::size_t a = 0; a < g.kernel; ++a) {
      for (std::size_t b = 0; b < g.kernel; ++b, ++row) {
        T* dst = col + row * g.cols();
        const long dy = static_cast<long>(a * g.dilation) - static_cast<long>(g.padding);
        const long dx = static_cast<long>(b * g.dilation) - static_cast<long>(g.padding);
        for (std::size_t i = 0; i < g.out_height; ++i) {
          const long y = static_cast<long>(i * g.stride) + dy;
          T* out = dst + i * g.out_width;
          if (y < 0 || y >= h) {
            for (std::size_t j = 0; j < g.out_width; ++j) out[j] = T(0);
            continue;
          }
          const T* src = xc + y * w;
          for (std::size_t j = 0; j < g.out_width; ++j) {
            const long xx = static_cast<long>(j * g.stride) + dx;
            out[j] = (xx >= 0 && xx < w) ? src[xx] : T(0);
          }
        }
      }
    }
  }
}

// Adjoint of im2col: accumulates col entries back into x.
template <class T>
void col2im_add(const PatchGeometry& g, const T* col, T* x) {
  const long h = static_cast<long>(g.height), w = static_cast<long>(g.width);
  std::size_t row = 0;
  for (std::size_t c = 0; c < g.channels; ++c) {
    T* xc = x + c * g.height * g.width;
    for (std::size_t a = 0; a < g.kernel; ++a) {
      for (std::size_t b = 0; b < g.kernel; ++b, ++row) {
        const T* src = col + row * g.cols();
        const long dy = static_cast<long>(a * g.dilation) - static_cast<long>(g.padding);
        const long dx = static_cast<long>(b * g.dilation) - static_cast<long>(g.padding);
        for (std::size_t i = 0; i < g.out_height; ++i) {
          const long y = static_cast<long>(i * g.stride) + dy;
          if (y < 0 || y >= h) continue;
          T* dst = xc + y * w;
          const T* in = src + i * g.out_width;
          for (std::size_t j = 0; j < g.out_width; ++j) {
            const long xx = static_cast<long>(j * g.stride) + dx;
            if (xx >= 0 && xx < w) dst[xx] += in[j];
          }
        }
      }
    }
  }
}

}  // namespace mfpu::linalg
