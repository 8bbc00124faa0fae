#pragma once

// Shared helpers for the unit and acceptance suites: random generators and
// brute-force reference implementations that never touch the library's
// optimized code paths.

#include <algorithm>
#include <cmath>
#include <span>
#include <cstdint>
#include <random>
#include <vector>

#include "mfpu/tensor.hpp"

namespace mfpu::testing {

template <class T = double>
Tensor<T> random_tensor(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  std::uniform_real_distribution<double> dist(lo, hi);
  std::vector<T> v(shape_numel(shape));
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return Tensor<T>(std::move(shape), std::move(v));
}

template <class T = double>
Tensor<T> random_parameter(Shape shape, std::mt19937_64& rng, double lo = -1.0, double hi = 1.0) {
  auto t = random_tensor<T>(std::move(shape), rng, lo, hi);
  t.set_requires_grad(true);
  return t;
}

// Direct evaluation of the convolution sum, one output at a time.
inline std::vector<double> brute_conv2d(const std::vector<double>& x, std::size_t cin, std::size_t h,
                                        std::size_t w, const std::vector<double>& weight, std::size_t cout,
                                        std::size_t m, std::size_t stride, std::size_t dil, std::size_t pad,
                                        std::size_t& ho, std::size_t& wo) {
  ho = (h + 2 * pad - dil * (m - 1) - 1) / stride + 1;
  wo = (w + 2 * pad - dil * (m - 1) - 1) / stride + 1;
  std::vector<double> out(cout * ho * wo, 0.0);
  for (std::size_t o = 0; o < cout; ++o)
    for (std::size_t i = 0; i < ho; ++i)
      for (std::size_t j = 0; j < wo; ++j) {
        double acc = 0.0;
        for (std::size_t c = 0; c < cin; ++c)
          for (std::size_t a = 0; a < m; ++a)
            for (std::size_t b = 0; b < m; ++b) {
              const long y = static_cast<long>(i * stride + a * dil) - static_cast<long>(pad);
              const long xx = static_cast<long>(j * stride + b * dil) - static_cast<long>(pad);
              if (y < 0 || xx < 0 || y >= static_cast<long>(h) || xx >= static_cast<long>(w)) continue;
              acc += weight[((o * cin + c) * m + a) * m + b] * x[(c * h + y) * w + xx];
            }
        out[(o * ho + i) * wo + j] = acc;
      }
  return out;
}

inline double max_abs_diff(std::span<const double> a, std::span<const double> b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace mfpu::testing
