#include <atomic>
#include <cstdlib>
#include <string_view>

#include "kernels_internal.hpp"

namespace mctm::kernels {
namespace {

const KernelTable* initial_table() noexcept {
  if (const char* env = std::getenv("MCTM_SIMD"); env && std::string_view(env) == "scalar") {
    return &scalar_table();
  }
  if (const KernelTable* t = avx2_table(); t && cpu_supports_avx2()) return t;
  return &scalar_table();
}

std::atomic<const KernelTable*>& current() noexcept {
  static std::atomic<const KernelTable*> table{initial_table()};
  return table;
}

}  // namespace

const KernelTable* avx2_table() noexcept {
#if defined(MCTM_HAVE_AVX2)
  return &detail::avx2_table_impl();
#else
  return nullptr;
#endif
}

bool cpu_supports_avx2() noexcept {
#if defined(MCTM_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable& active() noexcept { return *current().load(std::memory_order_relaxed); }

Isa active_isa() noexcept { return active().isa; }

std::string_view isa_name(Isa isa) noexcept {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
  }
  return "unknown";
}

bool select(Isa isa) noexcept {
  const KernelTable* t = nullptr;
  if (isa == Isa::Scalar) {
    t = &scalar_table();
  } else if (isa == Isa::Avx2 && cpu_supports_avx2()) {
    t = avx2_table();
  }
  if (!t) return false;
  current().store(t, std::memory_order_relaxed);
  return true;
}

}  // namespace mctm::kernels
