#pragma once

// Dense arithmetic kernels behind every layer.
//
// Each kernel exists as a portable scalar reference and, on x86-64, as an
// AVX2+FMA variant. The variant is picked once at startup from CPUID; setting
// MFPU_KERNELS=scalar in the environment forces the reference path. Both
// paths are deterministic, so a given machine always produces the same bits.

#include <cstddef>
#include <string_view>

namespace mfpu::kernels {

enum class Isa { Scalar, Avx2 };

template <class T>
struct KernelTable {
  // C[M x N] += A[M x K] * B[K x N], all row-major with leading dimensions.
  void (*gemm_nn)(std::size_t m, std::size_t n, std::size_t k, const T* a, std::size_t lda,
                  const T* b, std::size_t ldb, T* c, std::size_t ldc);
  T (*dot)(std::size_t n, const T* x, const T* y);
  // y += alpha * x
  void (*axpy)(std::size_t n, T alpha, const T* x, T* y);
  // v = momentum * v + (g + decay * w);  w -= lr * v
  void (*sgd_momentum)(std::size_t n, T lr, T momentum, T decay, T* w, const T* g, T* v);
  Isa isa;
};

bool isa_available(Isa isa);
std::string_view isa_name(Isa isa);

// Table for a specific instruction set; throws ContractViolation if the
// running CPU cannot execute it.
template <class T>
const KernelTable<T>& table(Isa isa);

// Table selected for this process.
template <class T>
const KernelTable<T>& active();

Isa active_isa();

namespace scalar {
template <class T>
const KernelTable<T>& table();
}

#if defined(MFPU_HAVE_AVX2)
namespace avx2 {
template <class T>
const KernelTable<T>& table();
}
#endif

}  // namespace mfpu::kernels
