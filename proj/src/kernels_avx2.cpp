#include <cstddef>

#include "mixtrade/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)
#define MIXTRADE_X86 1
#include <immintrin.h>
#else
#define MIXTRADE_X86 0
#endif

namespace mixtrade::kernels {

#if MIXTRADE_X86

// Each function carries the target attribute so the TU itself builds with
// the baseline ISA; dispatch guarantees these only run on capable CPUs.
#define MIXTRADE_AVX2 __attribute__((target("avx2,fma")))

namespace {

MIXTRADE_AVX2 void a_add(const double* a, const double* b, double* out,
                         size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_add_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] + b[i];
}

MIXTRADE_AVX2 void a_sub(const double* a, const double* b, double* out,
                         size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_sub_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

MIXTRADE_AVX2 void a_mul(const double* a, const double* b, double* out,
                         size_t n) {
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i),
                                            _mm256_loadu_pd(b + i)));
  }
  for (; i < n; ++i) out[i] = a[i] * b[i];
}

MIXTRADE_AVX2 void a_scale(const double* a, double c, double* out, size_t n) {
  const __m256d cv = _mm256_set1_pd(c);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), cv));
  }
  for (; i < n; ++i) out[i] = a[i] * c;
}

MIXTRADE_AVX2 void a_axpy(double a, const double* x, double* y, size_t n) {
  const __m256d av = _mm256_set1_pd(a);
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

MIXTRADE_AVX2 double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

MIXTRADE_AVX2 double a_dot(const double* a, const double* b, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc);
  }
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i] * b[i];
  return hsum(acc) + tail;
}

MIXTRADE_AVX2 double a_sum(const double* a, size_t n) {
  __m256d acc = _mm256_setzero_pd();
  size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(a + i));
  double tail = 0.0;
  for (; i < n; ++i) tail += a[i];
  return hsum(acc) + tail;
}

MIXTRADE_AVX2 void a_gemm_nn(const double* a, const double* b, double* c,
                             size_t m, size_t n, size_t p) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (size_t l = 0; l < p; ++l) {
      const double av = a[i * p + l];
      const __m256d avv = _mm256_set1_pd(av);
      const double* brow = b + l * n;
      size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(avv, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

MIXTRADE_AVX2 void a_gemm_nt(const double* a, const double* b, double* c,
                             size_t m, size_t n, size_t p) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * p;
    for (size_t j = 0; j < n; ++j) {
      c[i * n + j] += a_dot(arow, b + j * p, p);
    }
  }
}

MIXTRADE_AVX2 void a_gemm_tn(const double* a, const double* b, double* c,
                             size_t m, size_t n, size_t p) {
  for (size_t l = 0; l < p; ++l) {
    const double* arow = a + l * m;
    const double* brow = b + l * n;
    for (size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      const __m256d avv = _mm256_set1_pd(av);
      double* crow = c + i * n;
      size_t j = 0;
      for (; j + 4 <= n; j += 4) {
        __m256d cv = _mm256_loadu_pd(crow + j);
        cv = _mm256_fmadd_pd(avv, _mm256_loadu_pd(brow + j), cv);
        _mm256_storeu_pd(crow + j, cv);
      }
      for (; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

const Backend* avx2_backend() {
  if (!__builtin_cpu_supports("avx2") || !__builtin_cpu_supports("fma")) {
    return nullptr;
  }
  static const Backend backend{
      "avx2",  a_add,  a_sub,     a_mul,     a_scale,   a_axpy,
      a_dot,   a_sum,  a_gemm_nn, a_gemm_nt, a_gemm_tn,
  };
  return &backend;
}

#else  // !MIXTRADE_X86

const Backend* avx2_backend() { return nullptr; }

#endif

}  // namespace mixtrade::kernels
