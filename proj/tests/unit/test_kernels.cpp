#include <doctest.h>

#include <cmath>
#include <random>
#include <vector>

#include "mfpu/kernels.hpp"

using namespace mfpu::kernels;

namespace {

template <class T>
std::vector<T> random_vec(std::size_t n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> dist(-1.0, 1.0);
  std::vector<T> v(n);
  for (auto& x : v) x = static_cast<T>(dist(rng));
  return v;
}

template <class T>
double rel_err(T a, T b) {
  return std::abs(static_cast<double>(a) - static_cast<double>(b)) / std::max(1.0, std::abs(static_cast<double>(b)));
}

template <class T>
void check_equivalence(double tol) {
  if (!isa_available(Isa::Avx2)) {
    MESSAGE("AVX2 not available; equivalence test skipped");
    return;
  }
  const auto& ref = table<T>(Isa::Scalar);
  const auto& simd = table<T>(Isa::Avx2);
  std::mt19937_64 rng(42);
  for (std::size_t m : {1u, 3u, 4u, 5u, 9u}) {
    for (std::size_t n : {1u, 7u, 8u, 16u, 17u, 33u, 100u}) {
      for (std::size_t k : {1u, 2u, 9u, 72u}) {
        auto a = random_vec<T>(m * k, rng);
        auto b = random_vec<T>(k * n, rng);
        auto c0 = random_vec<T>(m * n, rng);
        auto c1 = c0;
        ref.gemm_nn(m, n, k, a.data(), k, b.data(), n, c0.data(), n);
        simd.gemm_nn(m, n, k, a.data(), k, b.data(), n, c1.data(), n);
        for (std::size_t i = 0; i < c0.size(); ++i) REQUIRE(rel_err(c1[i], c0[i]) < tol * static_cast<double>(k));
      }
    }
  }
  for (std::size_t n : {0u, 1u, 5u, 8u, 15u, 16u, 31u, 1000u}) {
    auto x = random_vec<T>(n, rng);
    auto y = random_vec<T>(n, rng);
    CHECK(rel_err(simd.dot(n, x.data(), y.data()), ref.dot(n, x.data(), y.data())) < tol * static_cast<double>(n + 1));
    auto y0 = y, y1 = y;
    ref.axpy(n, T(0.75), x.data(), y0.data());
    simd.axpy(n, T(0.75), x.data(), y1.data());
    for (std::size_t i = 0; i < n; ++i) CHECK(rel_err(y1[i], y0[i]) < tol);
    auto w0 = random_vec<T>(n, rng), w1 = w0;
    auto v0 = random_vec<T>(n, rng), v1 = v0;
    ref.sgd_momentum(n, T(0.01), T(0.9), T(0.0005), w0.data(), x.data(), v0.data());
    simd.sgd_momentum(n, T(0.01), T(0.9), T(0.0005), w1.data(), x.data(), v1.data());
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(rel_err(w1[i], w0[i]) < tol);
      CHECK(rel_err(v1[i], v0[i]) < tol);
    }
  }
}

}  // namespace

TEST_CASE("simd kernels match scalar reference (double)") { check_equivalence<double>(1e-14); }

TEST_CASE("simd kernels match scalar reference (float)") { check_equivalence<float>(2e-6); }

TEST_CASE("scalar gemm computes a hand-checked product") {
  const auto& kt = table<double>(Isa::Scalar);
  const double a[] = {1, 2, 3, 4, 5, 6};  // 2x3
  const double b[] = {7, 8, 9, 10, 11, 12};  // 3x2
  double c[] = {1, 0, 0, 1};
  kt.gemm_nn(2, 2, 3, a, 3, b, 2, c, 2);
  CHECK(c[0] == 59);
  CHECK(c[1] == 64);
  CHECK(c[2] == 139);
  CHECK(c[3] == 155);
}

TEST_CASE("active kernel table is stable for the process") {
  CHECK(&active<float>() == &active<float>());
  CHECK(active<double>().isa == active_isa());
  CHECK_FALSE(isa_name(active_isa()).empty());
}
