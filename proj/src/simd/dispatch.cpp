#include <cstdlib>
#include <string_view>

#include "kernels_impl.hpp"

namespace dsflow::simd {
namespace {

bool cpu_supports_avx2() {
#if defined(__x86_64__) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& select() {
  if (const char* forced = std::getenv("DSFLOW_SIMD");
      forced != nullptr && std::string_view(forced) == "scalar") {
    return detail::scalar_table();
  }
  if (const KernelTable* t = avx2_kernels()) return *t;
  return detail::scalar_table();
}

}  // namespace

const KernelTable& kernels() {
  static const KernelTable& active = select();
  return active;
}

const KernelTable& scalar_kernels() { return detail::scalar_table(); }

const KernelTable* avx2_kernels() {
  static const bool ok = cpu_supports_avx2();
  return ok ? detail::avx2_table() : nullptr;
}

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::scalar:
      return "scalar";
    case Isa::avx2:
      return "avx2";
  }
  return "unknown";
}

}  // namespace dsflow::simd
