#include "tangle/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>
#include <stdexcept>

namespace tangle::kernels {

bool avx2_supported() {
#if defined(TANGLE_HAVE_AVX2_BUILD) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

namespace {

const KernelTable* resolve(Backend b) {
  switch (b) {
    case Backend::Scalar:
      return &scalar_table();
    case Backend::Avx2:
#if defined(TANGLE_HAVE_AVX2_BUILD)
      if (avx2_supported()) return &avx2_table();
#endif
      throw std::invalid_argument("AVX2 kernel backend not available on this machine");
    case Backend::Auto:
    default:
#if defined(TANGLE_HAVE_AVX2_BUILD)
      if (avx2_supported()) return &avx2_table();
#endif
      return &scalar_table();
  }
}

const KernelTable* initial_table() {
  if (const char* env = std::getenv("TANGLE_KERNELS")) {
    if (std::strcmp(env, "scalar") == 0) return resolve(Backend::Scalar);
    if (std::strcmp(env, "avx2") == 0) return resolve(Backend::Avx2);
  }
  return resolve(Backend::Auto);
}

std::atomic<const KernelTable*> g_active{nullptr};

} // namespace

const KernelTable& active() {
  const KernelTable* t = g_active.load(std::memory_order_acquire);
  if (!t) {
    t = initial_table();
    g_active.store(t, std::memory_order_release);
  }
  return *t;
}

void force_backend(Backend b) {
  g_active.store(resolve(b), std::memory_order_release);
}

} // namespace tangle::kernels
