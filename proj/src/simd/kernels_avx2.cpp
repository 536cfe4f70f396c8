// AVX2 + FMA variants of the reference kernels. Compiled with -mavx2 -mfma
// and only reached through the dispatch table after a CPU feature check.

#include <immintrin.h>

#include "simd_internal.hpp"

namespace deld::simd::detail {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// Row i of C (width t) += sum_k a_row[k] * B[k, :], for one row.
inline void row_times_matrix(std::size_t s, std::size_t t, const double* a_row,
                             const double* b, double* c_row) {
  std::size_t j = 0;
  for (; j + 16 <= t; j += 16) {
    __m256d c0 = _mm256_loadu_pd(c_row + j);
    __m256d c1 = _mm256_loadu_pd(c_row + j + 4);
    __m256d c2 = _mm256_loadu_pd(c_row + j + 8);
    __m256d c3 = _mm256_loadu_pd(c_row + j + 12);
    for (std::size_t k = 0; k < s; ++k) {
      const __m256d av = _mm256_broadcast_sd(a_row + k);
      const double* bk = b + k * t + j;
      c0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bk), c0);
      c1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bk + 4), c1);
      c2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bk + 8), c2);
      c3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(bk + 12), c3);
    }
    _mm256_storeu_pd(c_row + j, c0);
    _mm256_storeu_pd(c_row + j + 4, c1);
    _mm256_storeu_pd(c_row + j + 8, c2);
    _mm256_storeu_pd(c_row + j + 12, c3);
  }
  for (; j + 4 <= t; j += 4) {
    __m256d c0 = _mm256_loadu_pd(c_row + j);
    for (std::size_t k = 0; k < s; ++k) {
      c0 = _mm256_fmadd_pd(_mm256_broadcast_sd(a_row + k),
                           _mm256_loadu_pd(b + k * t + j), c0);
    }
    _mm256_storeu_pd(c_row + j, c0);
  }
  for (; j < t; ++j) {
    double acc = c_row[j];
    for (std::size_t k = 0; k < s; ++k) acc += a_row[k] * b[k * t + j];
    c_row[j] = acc;
  }
}

}  // namespace

double dot_avx2(std::size_t n, const double* x, const double* y) {
  __m256d a0 = _mm256_setzero_pd();
  __m256d a1 = _mm256_setzero_pd();
  __m256d a2 = _mm256_setzero_pd();
  __m256d a3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 16 <= n; i += 16) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
    a1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), a1);
    a2 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 8), _mm256_loadu_pd(y + i + 8), a2);
    a3 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 12), _mm256_loadu_pd(y + i + 12), a3);
  }
  for (; i + 4 <= n; i += 4) {
    a0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), a0);
  }
  double acc = hsum(_mm256_add_pd(_mm256_add_pd(a0, a1), _mm256_add_pd(a2, a3)));
  for (; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_avx2(std::size_t n, double alpha, const double* x, double* y) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
    _mm256_storeu_pd(y + i + 4, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i + 4),
                                                _mm256_loadu_pd(y + i + 4)));
  }
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i),
                                            _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void gemm_nn_avx2(std::size_t r, std::size_t s, std::size_t t, const double* a,
                  const double* b, double* c) {
  for (std::size_t i = 0; i < r; ++i) row_times_matrix(s, t, a + i * s, b, c + i * t);
}

void gemm_nt_avx2(std::size_t r, std::size_t s, std::size_t t, const double* a,
                  const double* b, double* c) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a + i * s;
    std::size_t j = 0;
    // Four output columns per pass so each load of a_i feeds four FMAs.
    for (; j + 4 <= t; j += 4) {
      const double* b0 = b + j * s;
      const double* b1 = b0 + s;
      const double* b2 = b1 + s;
      const double* b3 = b2 + s;
      __m256d s0 = _mm256_setzero_pd();
      __m256d s1 = _mm256_setzero_pd();
      __m256d s2 = _mm256_setzero_pd();
      __m256d s3 = _mm256_setzero_pd();
      std::size_t k = 0;
      for (; k + 4 <= s; k += 4) {
        const __m256d av = _mm256_loadu_pd(ai + k);
        s0 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b0 + k), s0);
        s1 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b1 + k), s1);
        s2 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b2 + k), s2);
        s3 = _mm256_fmadd_pd(av, _mm256_loadu_pd(b3 + k), s3);
      }
      double r0 = hsum(s0), r1 = hsum(s1), r2 = hsum(s2), r3 = hsum(s3);
      for (; k < s; ++k) {
        r0 += ai[k] * b0[k];
        r1 += ai[k] * b1[k];
        r2 += ai[k] * b2[k];
        r3 += ai[k] * b3[k];
      }
      double* ci = c + i * t + j;
      ci[0] += r0;
      ci[1] += r1;
      ci[2] += r2;
      ci[3] += r3;
    }
    for (; j < t; ++j) c[i * t + j] += dot_avx2(s, ai, b + j * s);
  }
}

void gemm_tn_avx2(std::size_t r, std::size_t s, std::size_t t, const double* a,
                  const double* b, double* c) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a + i * s;
    const double* bi = b + i * t;
    for (std::size_t k = 0; k < s; ++k) {
      if (ai[k] != 0.0) axpy_avx2(t, ai[k], bi, c + k * t);
    }
  }
}

}  // namespace deld::simd::detail
