#pragma once

// Dense double-precision kernels behind every matrix product in the library.
//
// A scalar reference implementation is always available. On x86-64 an
// AVX2+FMA variant is compiled alongside it and selected at first use when the
// CPU reports both features. Setting DELD_SIMD=scalar in the environment
// forces the reference path.
//
// All matrices are row-major and densely packed. Every gemm variant
// accumulates into C (C += ...), callers zero C when they want a plain product.

#include <cstddef>
#include <string_view>

namespace deld::simd {

enum class Isa { kScalar, kAvx2 };

std::string_view isa_name(Isa isa);

struct KernelTable {
  Isa isa;
  // C[r x t] += A[r x s] * B[s x t]
  void (*gemm_nn)(std::size_t r, std::size_t s, std::size_t t, const double* a,
                  const double* b, double* c);
  // C[r x t] += A[r x s] * B[t x s]^T
  void (*gemm_nt)(std::size_t r, std::size_t s, std::size_t t, const double* a,
                  const double* b, double* c);
  // C[s x t] += A[r x s]^T * B[r x t]
  void (*gemm_tn)(std::size_t r, std::size_t s, std::size_t t, const double* a,
                  const double* b, double* c);
  double (*dot)(std::size_t n, const double* x, const double* y);
  // y += alpha * x
  void (*axpy)(std::size_t n, double alpha, const double* x, double* y);
};

const KernelTable& scalar_kernels();

// nullptr when the variant was not compiled in or the CPU lacks the features.
const KernelTable* avx2_kernels();

// The table used by the tensor ops. Resolved once; see force_isa().
const KernelTable& kernels();

Isa active_isa();

// Overrides the dispatch decision for the rest of the process. Requesting an
// unsupported ISA falls back to scalar. Returns the ISA actually selected.
Isa force_isa(Isa isa);

}  // namespace deld::simd
