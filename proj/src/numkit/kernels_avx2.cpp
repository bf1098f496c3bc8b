// SPDX-License-Identifier: Apache-2.0
// Built with -mavx2 -mfma -ffp-contract=off. Only reached through avx2()
// after a runtime CPU check.
#include "cad/numkit/kernels.hpp"

#if defined(__AVX2__) && defined(__FMA__)
#include <immintrin.h>

#include <cmath>

namespace cad::numkit::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d shuf = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, shuf));
}

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double s = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) s = std::fma(a[i], b[i], s);
  return s;
}

void gemv(const double* W, std::size_t m, std::size_t n, const double* x, const double* b, double* y) {
  for (std::size_t i = 0; i < m; ++i) {
    double s = dot(W + i * n, x, n);
    y[i] = b ? s + b[i] : s;
  }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  for (; i < n; ++i) y[i] = std::fma(a, x[i], y[i]);
}

void gemv_t_acc(const double* W, std::size_t m, std::size_t n, const double* g, double* dx) {
  for (std::size_t i = 0; i < m; ++i) axpy(g[i], W + i * n, dx, n);
}

void ger_acc(const double* g, std::size_t m, const double* x, std::size_t n, double* dW) {
  for (std::size_t i = 0; i < m; ++i) axpy(g[i], x, dW + i * n, n);
}

double sum_squares(const double* x, std::size_t n) { return dot(x, x, n); }

// No FMA here: the update must match the scalar reference bit for bit.
void adam(double* p, const double* g, double* m, double* v, std::size_t n, const AdamCoeffs& c) {
  const __m256d b1 = _mm256_set1_pd(c.beta1);
  const __m256d b2 = _mm256_set1_pd(c.beta2);
  const __m256d ob1 = _mm256_set1_pd(1.0 - c.beta1);
  const __m256d ob2 = _mm256_set1_pd(1.0 - c.beta2);
  const __m256d c1 = _mm256_set1_pd(c.correction1);
  const __m256d c2 = _mm256_set1_pd(c.correction2);
  const __m256d lr = _mm256_set1_pd(c.lr);
  const __m256d eps = _mm256_set1_pd(c.eps);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d gi = _mm256_loadu_pd(g + i);
    __m256d mi = _mm256_add_pd(_mm256_mul_pd(b1, _mm256_loadu_pd(m + i)), _mm256_mul_pd(ob1, gi));
    __m256d vi = _mm256_add_pd(_mm256_mul_pd(b2, _mm256_loadu_pd(v + i)),
                               _mm256_mul_pd(ob2, _mm256_mul_pd(gi, gi)));
    _mm256_storeu_pd(m + i, mi);
    _mm256_storeu_pd(v + i, vi);
    __m256d mhat = _mm256_div_pd(mi, c1);
    __m256d vhat = _mm256_div_pd(vi, c2);
    __m256d step = _mm256_div_pd(_mm256_mul_pd(lr, mhat), _mm256_add_pd(_mm256_sqrt_pd(vhat), eps));
    _mm256_storeu_pd(p + i, _mm256_sub_pd(_mm256_loadu_pd(p + i), step));
  }
  const double one_b1 = 1.0 - c.beta1;
  const double one_b2 = 1.0 - c.beta2;
  for (; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_b2 * (g[i] * g[i]);
    double mhat = m[i] / c.correction1;
    double vhat = v[i] / c.correction2;
    p[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

const KernelTable kTable{"avx2", dot, gemv, gemv_t_acc, ger_acc, axpy, sum_squares, adam};

}  // namespace

const KernelTable* avx2_table_unchecked() { return &kTable; }

}  // namespace cad::numkit::kernels

#else

namespace cad::numkit::kernels {
const KernelTable* avx2_table_unchecked() { return nullptr; }
}  // namespace cad::numkit::kernels

#endif
