#include <cstdlib>
#include <cstring>

#include "kernels/tables.hpp"

namespace phonoflux::kernels {

const KernelTable* avx2_kernels() {
#if defined(PHONOFLUX_HAVE_AVX2_TU) && (defined(__GNUC__) || defined(__clang__))
  static const bool supported = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return supported ? &avx2_table() : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable* neon_kernels() {
#if defined(PHONOFLUX_HAVE_NEON_TU)
  // Advanced SIMD is mandatory on AArch64.
  return &neon_table();
#else
  return nullptr;
#endif
}

std::vector<const KernelTable*> available_kernels() {
  std::vector<const KernelTable*> out{&scalar_kernels()};
  if (const KernelTable* t = avx2_kernels()) out.push_back(t);
  if (const KernelTable* t = neon_kernels()) out.push_back(t);
  return out;
}

const KernelTable& active_kernels() {
  static const KernelTable* chosen = [] {
    const char* env = std::getenv("PHONOFLUX_KERNELS");
    if (env != nullptr && std::strcmp(env, "scalar") == 0) return &scalar_kernels();
    if (const KernelTable* t = avx2_kernels()) return t;
    if (const KernelTable* t = neon_kernels()) return t;
    return &scalar_kernels();
  }();
  return *chosen;
}

}  // namespace phonoflux::kernels
