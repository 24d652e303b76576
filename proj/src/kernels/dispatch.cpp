#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace upsilon::kernels {

namespace {

bool cpu_has_avx2() {
#if defined(UPSILON_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& resolve() {
  if (const char* forced = std::getenv("UPSILON_SIMD"); forced != nullptr) {
    if (std::string_view(forced) == "scalar") return scalar();
  }
  if (const KernelTable* table = avx2(); table != nullptr) return *table;
  return scalar();
}

}  // namespace

const KernelTable& scalar() { return detail::kScalarTable; }

const KernelTable* avx2() {
#ifdef UPSILON_HAVE_AVX2
  static const bool supported = cpu_has_avx2();
  return supported ? &detail::kAvx2Table : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& active() {
  static const KernelTable& table = resolve();
  return table;
}

}  // namespace upsilon::kernels
