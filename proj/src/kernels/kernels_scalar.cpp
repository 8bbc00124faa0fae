#include "mfpu/kernels.hpp"

namespace mfpu::kernels::scalar {
namespace {

template <class T>
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda, const T* b,
             std::size_t ldb, T* c, std::size_t ldc) {
  for (std::size_t i = 0; i < m; ++i) {
    T* crow = c + i * ldc;
    for (std::size_t p = 0; p < k; ++p) {
      const T aip = a[i * lda + p];
      const T* brow = b + p * ldb;
      for (std::size_t j = 0; j < n; ++j) crow[j] += aip * brow[j];
    }
  }
}

template <class T>
T dot(std::size_t n, const T* x, const T* y) {
  T acc = 0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

template <class T>
void axpy(std::size_t n, T alpha, const T* x, T* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

template <class T>
void sgd_momentum(std::size_t n, T lr, T momentum, T decay, T* w, const T* g, T* v) {
  for (std::size_t i = 0; i < n; ++i) {
    v[i] = momentum * v[i] + (g[i] + decay * w[i]);
    w[i] -= lr * v[i];
  }
}

template <class T>
constexpr KernelTable<T> kTable{&gemm_nn<T>, &dot<T>, &axpy<T>, &sgd_momentum<T>, Isa::Scalar};

}  // namespace

template <class T>
const KernelTable<T>& table() {
  return kTable<T>;
}

template const KernelTable<float>& table<float>();
template const KernelTable<double>& table<double>();

}  // namespace mfpu::kernels::scalar
