#pragma once

#include <cstddef>
#include <string>

// Data-parallel inner loops behind the tensor engine. Two implementations:
// a scalar reference and an AVX2+FMA variant, selected once at runtime from
// CPU capabilities (override with MIXTRADE_KERNELS=scalar|avx2).
//
// Matrices are row-major. gemm_* ACCUMULATE into C; callers zero C first
// when they want a plain product.
//
// Transcendental maps (tanh/sigmoid/exp/log, softmax rows) are deliberately
// scalar libm in both backends: every caller sees bit-identical results for
// them regardless of the selected backend. Reductions (dot, sum, gemm) may
// differ between backends by rounding only; see the equivalence tests.
namespace mixtrade::kernels {

struct Backend {
  const char* name;

  void (*add)(const double* a, const double* b, double* out, size_t n);
  void (*sub)(const double* a, const double* b, double* out, size_t n);
  void (*mul)(const double* a, const double* b, double* out, size_t n);
  void (*scale)(const double* a, double c, double* out, size_t n);
  // y += a * x
  void (*axpy)(double a, const double* x, double* y, size_t n);
  double (*dot)(const double* a, const double* b, size_t n);
  double (*sum)(const double* a, size_t n);

  // C[m x n] += A[m x p] * B[p x n]
  void (*gemm_nn)(const double* a, const double* b, double* c, size_t m,
                  size_t n, size_t p);
  // C[m x n] += A[m x p] * B[n x p]^T
  void (*gemm_nt)(const double* a, const double* b, double* c, size_t m,
                  size_t n, size_t p);
  // C[m x n] += A[p x m]^T * B[p x n]
  void (*gemm_tn)(const double* a, const double* b, double* c, size_t m,
                  size_t n, size_t p);
};

const Backend& scalar_backend();

// nullptr when the build or the host CPU lacks AVX2+FMA.
const Backend* avx2_backend();

// The backend picked at startup (capability check + env override).
const Backend& active();

// Name of the active backend ("scalar" or "avx2").
std::string active_name();

// Shared scalar maps (identical across backends).
void vtanh(const double* x, double* y, size_t n);
void vsigmoid(const double* x, double* y, size_t n);
void vrelu(const double* x, double* y, size_t n);
void vexp(const double* x, double* y, size_t n);
void vlog(const double* x, double* y, size_t n);

// Stabilized row softmax / log-softmax (single row of length n).
void softmax_row(const double* x, double* y, size_t n);
void log_softmax_row(const double* x, double* y, size_t n);

}  // namespace mixtrade::kernels
