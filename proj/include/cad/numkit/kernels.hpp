// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>

namespace cad::numkit::kernels {

/// Coefficients for one bias-corrected Adam step.
/// correction1 = 1 - beta1^t, correction2 = 1 - beta2^t.
struct AdamCoeffs {
  double lr;
  double beta1;
  double beta2;
  double eps;
  double correction1;
  double correction2;
};

/// Inner loops used by the tensor ops. Every variant must agree with the
/// scalar reference to rounding (reductions may reassociate); the Adam step
/// is elementwise and must agree bitwise.
struct KernelTable {
  const char* name;
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y = W x + b, W is m x n row-major, b may be null.
  void (*gemv)(const double* W, std::size_t m, std::size_t n, const double* x, const double* b, double* y);
  // dx += W^T g
  void (*gemv_t_acc)(const double* W, std::size_t m, std::size_t n, const double* g, double* dx);
  // dW += g x^T
  void (*ger_acc)(const double* g, std::size_t m, const double* x, std::size_t n, double* dW);
  // y += a x
  void (*axpy)(double a, const double* x, double* y, std::size_t n);
  double (*sum_squares)(const double* x, std::size_t n);
  void (*adam)(double* param, const double* grad, double* m, double* v, std::size_t n, const AdamCoeffs& c);
};

const KernelTable& scalar();

/// Null when the binary was built without AVX2 support or the CPU lacks AVX2+FMA.
const KernelTable* avx2();

/// The table used by all ops. Picked once per process: AVX2 when available,
/// scalar otherwise. CAD_KERNELS=scalar|avx2 overrides the choice.
const KernelTable& active();

}  // namespace cad::numkit::kernels
