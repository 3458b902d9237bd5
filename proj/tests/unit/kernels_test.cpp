#include <cmath>
#include <vector>

#include <doctest.h>

#include "mixtrade/kernels.hpp"
#include "mixtrade/rng.hpp"

using namespace mixtrade;

namespace {

std::vector<double> rand_vec(Rng& r, size_t n, double lo = -1.0,
                             double hi = 1.0) {
  std::vector<double> v(n);
  for (auto& x : v) x = r.uniform(lo, hi);
  return v;
}

double max_abs_diff(const std::vector<double>& a,
                    const std::vector<double>& b) {
  double m = 0.0;
  for (size_t i = 0; i < a.size(); ++i)
    m = std::max(m, std::fabs(a[i] - b[i]));
  return m;
}

}  // namespace

TEST_CASE("active backend resolves") {
  CHECK((kernels::active_name() == "scalar" ||
         kernels::active_name() == "avx2"));
}

TEST_CASE("scalar and simd backends agree") {
  const kernels::Backend& s = kernels::scalar_backend();
  const kernels::Backend* v = kernels::avx2_backend();
  if (v == nullptr) {
    MESSAGE("simd backend unavailable on this host; scalar-only run");
    return;
  }

  Rng r(1234);
  for (size_t n : {1u, 3u, 4u, 7u, 64u, 257u}) {
    auto a = rand_vec(r, n), b = rand_vec(r, n);
    std::vector<double> o1(n), o2(n);

    // Pure elementwise ops round each lane once; bit-identical.
    s.add(a.data(), b.data(), o1.data(), n);
    v->add(a.data(), b.data(), o2.data(), n);
    CHECK(o1 == o2);
    s.sub(a.data(), b.data(), o1.data(), n);
    v->sub(a.data(), b.data(), o2.data(), n);
    CHECK(o1 == o2);
    s.mul(a.data(), b.data(), o1.data(), n);
    v->mul(a.data(), b.data(), o2.data(), n);
    CHECK(o1 == o2);
    s.scale(a.data(), 1.37, o1.data(), n);
    v->scale(a.data(), 1.37, o2.data(), n);
    CHECK(o1 == o2);

    // Reductions and fused multiply-adds may differ by rounding only.
    auto y1 = rand_vec(r, n);
    auto y2 = y1;
    s.axpy(0.77, a.data(), y1.data(), n);
    v->axpy(0.77, a.data(), y2.data(), n);
    CHECK(max_abs_diff(y1, y2) < 1e-13);

    CHECK(std::fabs(s.dot(a.data(), b.data(), n) -
                    v->dot(a.data(), b.data(), n)) < 1e-12);
    CHECK(std::fabs(s.sum(a.data(), n) - v->sum(a.data(), n)) < 1e-12);
  }
}

TEST_CASE("gemm variants agree across backends and match a naive oracle") {
  const kernels::Backend& s = kernels::scalar_backend();
  const kernels::Backend* v = kernels::avx2_backend();
  Rng r(99);

  for (auto [m, n, p] :
       {std::array<size_t, 3>{1, 1, 1}, std::array<size_t, 3>{2, 3, 4},
        std::array<size_t, 3>{5, 2, 7}, std::array<size_t, 3>{8, 16, 15},
        std::array<size_t, 3>{13, 5, 9}}) {
    auto A = rand_vec(r, m * p), B = rand_vec(r, p * n);
    auto Bt = rand_vec(r, n * p), At = rand_vec(r, p * m);

    // Naive triple loop, independent accumulation order.
    std::vector<double> nn_ref(m * n, 0.0), nt_ref(m * n, 0.0),
        tn_ref(m * n, 0.0);
    for (size_t i = 0; i < m; ++i)
      for (size_t j = 0; j < n; ++j) {
        double acc = 0.0, acc_nt = 0.0, acc_tn = 0.0;
        for (size_t l = 0; l < p; ++l) {
          acc += A[i * p + l] * B[l * n + j];
          acc_nt += A[i * p + l] * Bt[j * p + l];
          acc_tn += At[l * m + i] * B[l * n + j];
        }
        nn_ref[i * n + j] = acc;
        nt_ref[i * n + j] = acc_nt;
        tn_ref[i * n + j] = acc_tn;
      }

    std::vector<double> c1(m * n, 0.0), c2(m * n, 0.0);
    s.gemm_nn(A.data(), B.data(), c1.data(), m, n, p);
    CHECK(max_abs_diff(c1, nn_ref) < 1e-12);
    if (v) {
      v->gemm_nn(A.data(), B.data(), c2.data(), m, n, p);
      CHECK(max_abs_diff(c1, c2) < 1e-12);
    }

    std::fill(c1.begin(), c1.end(), 0.0);
    s.gemm_nt(A.data(), Bt.data(), c1.data(), m, n, p);
    CHECK(max_abs_diff(c1, nt_ref) < 1e-12);
    if (v) {
      std::fill(c2.begin(), c2.end(), 0.0);
      v->gemm_nt(A.data(), Bt.data(), c2.data(), m, n, p);
      CHECK(max_abs_diff(c1, c2) < 1e-12);
    }

    std::fill(c1.begin(), c1.end(), 0.0);
    s.gemm_tn(At.data(), B.data(), c1.data(), m, n, p);
    CHECK(max_abs_diff(c1, tn_ref) < 1e-12);
    if (v) {
      std::fill(c2.begin(), c2.end(), 0.0);
      v->gemm_tn(At.data(), B.data(), c2.data(), m, n, p);
      CHECK(max_abs_diff(c1, c2) < 1e-12);
    }

    // gemm accumulates: running twice doubles the result.
    std::fill(c1.begin(), c1.end(), 0.0);
    s.gemm_nn(A.data(), B.data(), c1.data(), m, n, p);
    s.gemm_nn(A.data(), B.data(), c1.data(), m, n, p);
    for (size_t i = 0; i < m * n; ++i)
      CHECK(c1[i] == doctest::Approx(2.0 * nn_ref[i]).epsilon(1e-12));
  }
}

TEST_CASE("transcendental maps are shared, stabilized, and exact at anchors") {
  std::vector<double> x{-700.0, -2.0, 0.0, 2.0, 700.0};
  std::vector<double> y(x.size());
  kernels::vsigmoid(x.data(), y.data(), x.size());
  CHECK(y[2] == 0.5);
  CHECK(y[0] >= 0.0);
  CHECK(y[0] < 1e-300);
  CHECK(y[4] <= 1.0);  // saturates to exactly 1.0 in double precision
  CHECK(y[4] > 0.999);
  CHECK(y[1] == doctest::Approx(1.0 / (1.0 + std::exp(2.0))).epsilon(1e-15));

  kernels::vtanh(x.data(), y.data(), x.size());
  CHECK(y[2] == 0.0);

  // Softmax stays finite and normalized under large logits.
  std::vector<double> logits{1000.0, 0.0, -1000.0};
  std::vector<double> sm(3);
  kernels::softmax_row(logits.data(), sm.data(), 3);
  CHECK(sm[0] == doctest::Approx(1.0));
  double total = sm[0] + sm[1] + sm[2];
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  for (double p : sm) CHECK(p >= 0.0);

  std::vector<double> lsm(3);
  kernels::log_softmax_row(logits.data(), lsm.data(), 3);
  CHECK(std::isfinite(lsm[1]));
  CHECK(lsm[1] == doctest::Approx(-1000.0).epsilon(1e-9));
}
