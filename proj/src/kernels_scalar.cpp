#include <cmath>
#include <cstddef>

#include "mixtrade/kernels.hpp"

namespace mixtrade::kernels {
namespace {

void s_add(const double* a, const double* b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void s_sub(const double* a, const double* b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void s_mul(const double* a, const double* b, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void s_scale(const double* a, double c, double* out, size_t n) {
  for (size_t i = 0; i < n; ++i) out[i] = a[i] * c;
}

void s_axpy(double a, const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double s_dot(const double* a, const double* b, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double s_sum(const double* a, size_t n) {
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

void s_gemm_nn(const double* a, const double* b, double* c, size_t m, size_t n,
               size_t p) {
  for (size_t i = 0; i < m; ++i) {
    double* crow = c + i * n;
    for (size_t l = 0; l < p; ++l) {
      const double av = a[i * p + l];
      const double* brow = b + l * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

void s_gemm_nt(const double* a, const double* b, double* c, size_t m, size_t n,
               size_t p) {
  for (size_t i = 0; i < m; ++i) {
    const double* arow = a + i * p;
    for (size_t j = 0; j < n; ++j) {
      const double* brow = b + j * p;
      double acc = 0.0;
      for (size_t l = 0; l < p; ++l) acc += arow[l] * brow[l];
      c[i * n + j] += acc;
    }
  }
}

void s_gemm_tn(const double* a, const double* b, double* c, size_t m, size_t n,
               size_t p) {
  for (size_t l = 0; l < p; ++l) {
    const double* arow = a + l * m;
    const double* brow = b + l * n;
    for (size_t i = 0; i < m; ++i) {
      const double av = arow[i];
      double* crow = c + i * n;
      for (size_t j = 0; j < n; ++j) crow[j] += av * brow[j];
    }
  }
}

}  // namespace

const Backend& scalar_backend() {
  static const Backend backend{
      "scalar", s_add,  s_sub,     s_mul,     s_scale,   s_axpy,
      s_dot,    s_sum,  s_gemm_nn, s_gemm_nt, s_gemm_tn,
  };
  return backend;
}

void vtanh(const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = std::tanh(x[i]);
}

void vsigmoid(const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = 1.0 / (1.0 + std::exp(-x[i]));
}

void vrelu(const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = x[i] > 0.0 ? x[i] : 0.0;
}

void vexp(const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = std::exp(x[i]);
}

void vlog(const double* x, double* y, size_t n) {
  for (size_t i = 0; i < n; ++i) y[i] = std::log(x[i]);
}

void softmax_row(const double* x, double* y, size_t n) {
  double mx = x[0];
  for (size_t i = 1; i < n; ++i) mx = x[i] > mx ? x[i] : mx;
  double denom = 0.0;
  for (size_t i = 0; i < n; ++i) {
    y[i] = std::exp(x[i] - mx);
    denom += y[i];
  }
  const double inv = 1.0 / denom;
  for (size_t i = 0; i < n; ++i) y[i] *= inv;
}

void log_softmax_row(const double* x, double* y, size_t n) {
  double mx = x[0];
  for (size_t i = 1; i < n; ++i) mx = x[i] > mx ? x[i] : mx;
  double denom = 0.0;
  for (size_t i = 0; i < n; ++i) denom += std::exp(x[i] - mx);
  const double lse = mx + std::log(denom);
  for (size_t i = 0; i < n; ++i) y[i] = x[i] - lse;
}

}  // namespace mixtrade::kernels
