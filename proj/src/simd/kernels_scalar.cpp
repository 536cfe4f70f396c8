#include "simd_internal.hpp"

namespace deld::simd::detail {

void gemm_nn_scalar(std::size_t r, std::size_t s, std::size_t t, const double* a,
                    const double* b, double* c) {
  for (std::size_t i = 0; i < r; ++i) {
    double* ci = c + i * t;
    const double* ai = a + i * s;
    for (std::size_t k = 0; k < s; ++k) {
      const double aik = ai[k];
      const double* bk = b + k * t;
      for (std::size_t j = 0; j < t; ++j) ci[j] += aik * bk[j];
    }
  }
}

void gemm_nt_scalar(std::size_t r, std::size_t s, std::size_t t, const double* a,
                    const double* b, double* c) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a + i * s;
    for (std::size_t j = 0; j < t; ++j) {
      const double* bj = b + j * s;
      double acc = 0.0;
      for (std::size_t k = 0; k < s; ++k) acc += ai[k] * bj[k];
      c[i * t + j] += acc;
    }
  }
}

void gemm_tn_scalar(std::size_t r, std::size_t s, std::size_t t, const double* a,
                    const double* b, double* c) {
  for (std::size_t i = 0; i < r; ++i) {
    const double* ai = a + i * s;
    const double* bi = b + i * t;
    for (std::size_t k = 0; k < s; ++k) {
      const double aik = ai[k];
      double* ck = c + k * t;
      for (std::size_t j = 0; j < t; ++j) ck[j] += aik * bi[j];
    }
  }
}

double dot_scalar(std::size_t n, const double* x, const double* y) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
  return acc;
}

void axpy_scalar(std::size_t n, double alpha, const double* x, double* y) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

}  // namespace deld::simd::detail
