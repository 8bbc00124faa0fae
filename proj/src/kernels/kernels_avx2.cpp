// Compiled with -mavx2 -mfma; only reached after a CPUID check.

#include <immintrin.h>

#include "mfpu/kernels.hpp"

namespace mfpu::kernels::avx2 {
namespace {

template <class T>
struct Vec;

template <>
struct Vec<float> {
  using Reg = __m256;
  static constexpr std::size_t kWidth = 8;
  static Reg zero() { return _mm256_setzero_ps(); }
  static Reg set1(float v) { return _mm256_set1_ps(v); }
  static Reg load(const float* p) { return _mm256_loadu_ps(p); }
  static void store(float* p, Reg r) { _mm256_storeu_ps(p, r); }
  static Reg add(Reg a, Reg b) { return _mm256_add_ps(a, b); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_ps(a, b, c); }
  static Reg fnmadd(Reg a, Reg b, Reg c) { return _mm256_fnmadd_ps(a, b, c); }
  static float hsum(Reg r) {
    __m128 lo = _mm256_castps256_ps128(r);
    __m128 hi = _mm256_extractf128_ps(r, 1);
    lo = _mm_add_ps(lo, hi);
    __m128 shuf = _mm_movehdup_ps(lo);
    __m128 sums = _mm_add_ps(lo, shuf);
    shuf = _mm_movehl_ps(shuf, sums);
    sums = _mm_add_ss(sums, shuf);
    return _mm_cvtss_f32(sums);
  }
};

template <>
struct Vec<double> {
  using Reg = __m256d;
  static constexpr std::size_t kWidth = 4;
  static Reg zero() { return _mm256_setzero_pd(); }
  static Reg set1(double v) { return _mm256_set1_pd(v); }
  static Reg load(const double* p) { return _mm256_loadu_pd(p); }
  static void store(double* p, Reg r) { _mm256_storeu_pd(p, r); }
  static Reg add(Reg a, Reg b) { return _mm256_add_pd(a, b); }
  static Reg fmadd(Reg a, Reg b, Reg c) { return _mm256_fmadd_pd(a, b, c); }
  static Reg fnmadd(Reg a, Reg b, Reg c) { return _mm256_fnmadd_pd(a, b, c); }
  static double hsum(Reg r) {
    __m128d lo = _mm256_castpd256_pd128(r);
    __m128d hi = _mm256_extractf128_pd(r, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d high64 = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, high64));
  }
};

// 4 x (2 * width) register block.
template <class T>
void gemm_block4(std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
                 std::size_t ldb, T* c, std::size_t ldc) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  std::size_t j = 0;
  for (; j + 2 * w <= n; j += 2 * w) {
    typename V::Reg c00 = V::zero(), c01 = V::zero(), c10 = V::zero(), c11 = V::zero();
    typename V::Reg c20 = V::zero(), c21 = V::zero(), c30 = V::zero(), c31 = V::zero();
    for (std::size_t p = 0; p < k; ++p) {
      const T* brow = b + p * ldb + j;
      const auto b0 = V::load(brow);
      const auto b1 = V::load(brow + w);
      auto av = V::set1(a[p]);
      c00 = V::fmadd(av, b0, c00);
      c01 = V::fmadd(av, b1, c01);
      av = V::set1(a[lda + p]);
      c10 = V::fmadd(av, b0, c10);
      c11 = V::fmadd(av, b1, c11);
      av = V::set1(a[2 * lda + p]);
      c20 = V::fmadd(av, b0, c20);
      c21 = V::fmadd(av, b1, c21);
      av = V::set1(a[3 * lda + p]);
      c30 = V::fmadd(av, b0, c30);
      c31 = V::fmadd(av, b1, c31);
    }
    T* c0 = c + j;
    V::store(c0, V::add(V::load(c0), c00));
    V::store(c0 + w, V::add(V::load(c0 + w), c01));
    T* c1 = c0 + ldc;
    V::store(c1, V::add(V::load(c1), c10));
    V::store(c1 + w, V::add(V::load(c1 + w), c11));
    T* c2 = c1 + ldc;
    V::store(c2, V::add(V::load(c2), c20));
    V::store(c2 + w, V::add(V::load(c2 + w), c21));
    T* c3 = c2 + ldc;
    V::store(c3, V::add(V::load(c3), c30));
    V::store(c3 + w, V::add(V::load(c3 + w), c31));
  }
  for (; j + w <= n; j += w) {
    typename V::Reg acc[4] = {V::zero(), V::zero(), V::zero(), V::zero()};
    for (std::size_t p = 0; p < k; ++p) {
      const auto bv = V::load(b + p * ldb + j);
      for (std::size_t r = 0; r < 4; ++r) acc[r] = V::fmadd(V::set1(a[r * lda + p]), bv, acc[r]);
    }
    for (std::size_t r = 0; r < 4; ++r) {
      T* cr = c + r * ldc + j;
      V::store(cr, V::add(V::load(cr), acc[r]));
    }
  }
  for (; j < n; ++j) {
    for (std::size_t r = 0; r < 4; ++r) {
      T acc = 0;
      for (std::size_t p = 0; p < k; ++p) acc += a[r * lda + p] * b[p * ldb + j];
      c[r * ldc + j] += acc;
    }
  }
}

template <class T>
void gemm_row(std::size_t n, std::size_t k, const T* a, const T* b, std::size_t ldb, T* c) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  std::size_t j = 0;
  for (; j + w <= n; j += w) {
    auto acc = V::zero();
    for (std::size_t p = 0; p < k; ++p) acc = V::fmadd(V::set1(a[p]), V::load(b + p * ldb + j), acc);
    V::store(c + j, V::add(V::load(c + j), acc));
  }
  for (; j < n; ++j) {
    T acc = 0;
    for (std::size_t p = 0; p < k; ++p) acc += a[p] * b[p * ldb + j];
    c[j] += acc;
  }
}

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc) {
  std::size_t i = 0;
  for (; i + 4 <= m; i += 4) gemm_block4(n, k, a + i * lda, lda, b, ldb, c + i * ldc, ldc);
  for (; i < m; ++i) gemm_row(n, k, a + i * lda, b, ldb, c + i * ldc);
}

template <class T>
T dot(std::size_t n, const T* x, const T* y) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  auto acc0 = V::zero();
  auto acc1 = V::zero();
  std::size_t i = 0;
  for (; i + 2 * w <= n; i += 2 * w) {
    acc0 = V::fmadd(V::load(x + i), V::load(y + i), acc0);
    acc1 = V::fmadd(V::load(x + i + w), V::load(y + i + w), acc1);
  }
  for (; i + w <= n; i += w) acc0 = V::fmadd(V::load(x + i), V::load(y + i), acc0);
  T acc = V::hsum(V::add(acc0, acc1));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  using V = Vec<T>;
  constexpr std::size_t w = V::kWidth;
  const auto av = V::set1(alpha);
  std::size_t i = 0;
  for (; i + w <= n; i += w) V::store(y + i, V::fmadd(av, V::load(x + i), V::load(y + i)));
  for (; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void sgd_momentum(std::size_t n, T lr, T momentum, T decay, T* w, const T* g, T* v) {
  using V = Vec<T>;
  constexpr std::size_t width = V::kWidth;
  const auto lrv = V::set1(lr);
  const auto mv = V::set1(momentum);
  const auto dv = V::set1(decay);
  std::size_t i = 0;
  for (; i + width <= n; i += width) {
    const auto wi = V::load(w + i);
    const auto step = V::fmadd(dv, wi, V::load(g + i));
    const auto vi = V::fmadd(mv, V::load(v + i), step);
    V::store(v + i, vi);
    V::store(w + i, V::fnmadd(lrv, vi, wi));
  }
  for (; i < n; ++i) {
    v[i] = momentum * v[i] + (g[i] + decay * w[i]);
    w[i] -= lr * v[i];
  }
}

template <class T>
constexpr KernelTable<T> kTable{&gemm_nn<T>, &dot<T>, &axpy<T>, &sgd_momentum<T>, Isa::Avx2};

}  // namespace

template <class T>
const KernelTable<T>& table() {
  return kTable<T>;
}

template const KernelTable<float>& table<float>();
template const KernelTable<double>& table<double>();

}  // namespace mfpu::kernels::avx2
