#include "iconik/simd/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace iconik::simd {

char const *to_string(Isa isa)
{
  switch (isa) {
  case Isa::Scalar: return "scalar";
  case Isa::Avx2: return "avx2";
  }
  return "unknown";
}

KernelTable const &scalar_kernels()
{
  static KernelTable const table = detail::make_scalar_table();
  return table;
}

KernelTable const *avx2_kernels()
{
#if defined(ICONIK_BUILD_AVX2) && (defined(__GNUC__) || defined(__clang__))
  static KernelTable const *table = [] () -> KernelTable const * {
    __builtin_cpu_init();
    if (__builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma")) { return detail::make_avx2_table(); }
    return nullptr;
  }();
  return table;
#else
  return nullptr;
#endif
}

namespace {
KernelTable const *initial_table()
{
  char const *env = std::getenv("ICONIK_SIMD");
  if (env && std::strcmp(env, "scalar") == 0) { return &scalar_kernels(); }
  if (auto const *t = avx2_kernels()) { return t; }
  return &scalar_kernels();
}

std::atomic<KernelTable const *> &active_table()
{
  static std::atomic<KernelTable const *> t{initial_table()};
  return t;
}
} // namespace

KernelTable const &kernels() { return *active_table().load(std::memory_order_relaxed); }

bool select_isa(Isa isa)
{
  if (isa == Isa::Scalar) {
    active_table().store(&scalar_kernels());
    return true;
  }
  if (auto const *t = avx2_kernels()) {
    active_table().store(t);
    return true;
  }
  return false;
}

} // namespace iconik::simd
