#include "kernels_impl.hpp"

#include <cmath>

namespace upsilon::kernels::detail {

namespace {

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void axpby_scalar(double alpha, const double* x, double beta, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] = alpha * x[i] + beta * y[i];
}

void scale_scalar(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sum_scalar(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

void scaled_product_scalar(double alpha, const double* a, const double* b, double* out,
                           std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = alpha * a[i] * b[i];
}

void adam_update_scalar(double* param, const double* grad, double* m, double* v, std::size_t n,
                        const AdamCoefficients& c) {
  const double step = c.learning_rate / c.bias_correction1;
  const double inv_bc2 = 1.0 / c.bias_correction2;
  for (std::size_t i = 0; i < n; ++i) {
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    param[i] -= step * m[i] / (std::sqrt(v[i] * inv_bc2) + c.epsilon);
  }
}

}  // namespace

const KernelTable kScalarTable{
    "scalar",       dot_scalar,          axpy_scalar,       axpby_scalar, scale_scalar,
    sum_scalar,     scaled_product_scalar, adam_update_scalar,
};

}  // namespace upsilon::kernels::detail
