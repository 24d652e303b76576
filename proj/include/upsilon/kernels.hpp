#pragma once

// Dense inner-loop kernels with a scalar reference implementation and SIMD
// variants chosen once at startup from the host CPU.
//
// Every variant must agree with the scalar reference to within rounding
// (FMA contraction and lane-wise partial sums change the last bits). Within
// one variant the summation order is fixed, so results are reproducible run
// to run on the same machine.

#include <cstddef>
#include <string_view>

namespace upsilon::kernels {

struct AdamCoefficients {
  double learning_rate;
  double beta1;
  double beta2;
  double epsilon;
  double bias_correction1;  // 1 - beta1^t
  double bias_correction2;  // 1 - beta2^t
};

struct KernelTable {
  std::string_view name;

  // sum_i a[i] * b[i]
  double (*dot)(const double* a, const double* b, std::size_t n);
  // y += alpha * x
  void (*axpy)(double alpha, const double* x, double* y, std::size_t n);
  // y = alpha * x + beta * y
  void (*axpby)(double alpha, const double* x, double beta, double* y, std::size_t n);
  // x *= alpha
  void (*scale)(double alpha, double* x, std::size_t n);
  double (*sum)(const double* x, std::size_t n);
  // out[i] = alpha * a[i] * b[i]
  void (*scaled_product)(double alpha, const double* a, const double* b, double* out,
                         std::size_t n);
  // One Adam moment/parameter update over a flat parameter block.
  void (*adam_update)(double* param, const double* grad, double* m, double* v, std::size_t n,
                      const AdamCoefficients& c);
};

const KernelTable& scalar();

// nullptr when the build or the CPU lacks AVX2+FMA.
const KernelTable* avx2();

// The table used by the library. Resolved on first call: AVX2 when available,
// scalar otherwise, or scalar when UPSILON_SIMD=scalar is set in the environment.
const KernelTable& active();

}  // namespace upsilon::kernels
