#include <atomic>
#include <cstdlib>
#include <string>

#include "deld/simd.hpp"
#include "simd_internal.hpp"

namespace deld::simd {

namespace {

const KernelTable kScalar{Isa::kScalar,           detail::gemm_nn_scalar,
                          detail::gemm_nt_scalar, detail::gemm_tn_scalar,
                          detail::dot_scalar,     detail::axpy_scalar};

#if defined(DELD_HAVE_AVX2)
const KernelTable kAvx2{Isa::kAvx2,           detail::gemm_nn_avx2, detail::gemm_nt_avx2,
                        detail::gemm_tn_avx2, detail::dot_avx2,     detail::axpy_avx2};
#endif

bool cpu_has_avx2() {
#if defined(DELD_HAVE_AVX2) && (defined(__GNUC__) || defined(__clang__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

const KernelTable* resolve_default() {
  if (const char* env = std::getenv("DELD_SIMD"); env && std::string(env) == "scalar") {
    return &kScalar;
  }
  if (const KernelTable* t = avx2_kernels()) return t;
  return &kScalar;
}

std::atomic<const KernelTable*>& active() {
  static std::atomic<const KernelTable*> table{resolve_default()};
  return table;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return "scalar";
    case Isa::kAvx2:
      return "avx2";
  }
  return "unknown";
}

const KernelTable& scalar_kernels() { return kScalar; }

const KernelTable* avx2_kernels() {
#if defined(DELD_HAVE_AVX2)
  static const bool supported = cpu_has_avx2();
  return supported ? &kAvx2 : nullptr;
#else
  return nullptr;
#endif
}

const KernelTable& kernels() { return *active().load(std::memory_order_acquire); }

Isa active_isa() { return kernels().isa; }

Isa force_isa(Isa isa) {
  const KernelTable* table = &kScalar;
  if (isa == Isa::kAvx2 && avx2_kernels() != nullptr) table = avx2_kernels();
  active().store(table, std::memory_order_release);
  return table->isa;
}

}  // namespace deld::simd
