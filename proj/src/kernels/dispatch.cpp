#include "ptrack/kernels/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <string>

namespace ptrack::kernels {

#if defined(PTRACK_HAVE_AVX2)
const KernelTable& avx2_table_impl();
#endif

const KernelTable* avx2_table() {
#if defined(PTRACK_HAVE_AVX2)
  static const bool ok = __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
  return ok ? &avx2_table_impl() : nullptr;
#else
  return nullptr;
#endif
}

namespace {

const KernelTable* pick(std::string_view name) {
  if (name == "scalar") return &scalar_table();
  if (name == "avx2") return avx2_table();
  if (name == "auto" || name.empty()) {
    const KernelTable* v = avx2_table();
    return v ? v : &scalar_table();
  }
  return nullptr;
}

std::atomic<const KernelTable*>& slot() {
  static std::atomic<const KernelTable*> s{[] {
    const char* env = std::getenv("PTRACK_KERNELS");
    const KernelTable* t = pick(env ? std::string_view(env) : std::string_view());
    return t ? t : pick("auto");
  }()};
  return s;
}

}  // namespace

const KernelTable& active() { return *slot().load(std::memory_order_acquire); }

bool select(std::string_view name) {
  const KernelTable* t = pick(name);
  if (!t) return false;
  slot().store(t, std::memory_order_release);
  return true;
}

}  // namespace ptrack::kernels
