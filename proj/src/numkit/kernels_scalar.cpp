// SPDX-License-Identifier: Apache-2.0
#include <cmath>

#include "cad/numkit/kernels.hpp"

namespace cad::numkit::kernels {
namespace {

double dot(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
  return s;
}

void gemv(const double* W, std::size_t m, std::size_t n, const double* x, const double* b, double* y) {
  for (std::size_t i = 0; i < m; ++i) {
    double s = dot(W + i * n, x, n);
    y[i] = b ? s + b[i] : s;
  }
}

void axpy(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

void gemv_t_acc(const double* W, std::size_t m, std::size_t n, const double* g, double* dx) {
  for (std::size_t i = 0; i < m; ++i) axpy(g[i], W + i * n, dx, n);
}

void ger_acc(const double* g, std::size_t m, const double* x, std::size_t n, double* dW) {
  for (std::size_t i = 0; i < m; ++i) axpy(g[i], x, dW + i * n, n);
}

double sum_squares(const double* x, std::size_t n) { return dot(x, x, n); }

void adam(double* p, const double* g, double* m, double* v, std::size_t n, const AdamCoeffs& c) {
  const double one_b1 = 1.0 - c.beta1;
  const double one_b2 = 1.0 - c.beta2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + one_b1 * g[i];
    v[i] = c.beta2 * v[i] + one_b2 * (g[i] * g[i]);
    double mhat = m[i] / c.correction1;
    double vhat = v[i] / c.correction2;
    p[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

}  // namespace

const KernelTable& scalar() {
  static const KernelTable table{"scalar", dot, gemv, gemv_t_acc, ger_acc, axpy, sum_squares, adam};
  return table;
}

}  // namespace cad::numkit::kernels
