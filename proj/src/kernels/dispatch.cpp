#include <cstdlib>
#include <string>

#include "mfpu/errors.hpp"
#include "mfpu/kernels.hpp"

namespace mfpu::kernels {
namespace {

Isa detect() {
  if (const char* forced = std::getenv("MFPU_KERNELS")) {
    const std::string name(forced);
    if (name == "scalar") return Isa::Scalar;
    if (name == "avx2" && isa_available(Isa::Avx2)) return Isa::Avx2;
  }
  return isa_available(Isa::Avx2) ? Isa::Avx2 : Isa::Scalar;
}

}  // namespace

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if defined(MFPU_HAVE_AVX2)
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
  }
  return false;
}

std::string_view isa_name(Isa isa) { return isa == Isa::Avx2 ? "avx2" : "scalar"; }

Isa active_isa() {
  static const Isa selected = detect();
  return selected;
}

template <class T>
const KernelTable<T>& table(Isa isa) {
  require(isa_available(isa), "kernel ISA not available on this CPU: " + std::string(isa_name(isa)));
#if defined(MFPU_HAVE_AVX2)
  if (isa == Isa::Avx2) return avx2::table<T>();
#endif
  return scalar::table<T>();
}

template <class T>
const KernelTable<T>& active() {
  static const KernelTable<T>& selected = table<T>(active_isa());
  return selected;
}

template const KernelTable<float>& table<float>(Isa);
template const KernelTable<double>& table<double>(Isa);
template const KernelTable<float>& active<float>();
template const KernelTable<double>& active<double>();

}  // namespace mfpu::kernels
