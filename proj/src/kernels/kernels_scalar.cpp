#include "klsda/kernels.hpp"

namespace klsda::kernels::detail {
namespace {

// Four independent accumulators, combined pairwise at the end. The wide
// variants reduce in the same lane order so results differ only by FMA
// rounding.
double dot_scalar(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  double s = (s0 + s2) + (s1 + s3);
  for (; i < n; ++i) s += a[i] * b[i];
  return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

double squared_norm_scalar(const double* x, std::size_t n) {
  return dot_scalar(x, x, n);
}

void subtract_scalar(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

}  // namespace

const Table kScalarTable{dot_scalar, axpy_scalar, squared_norm_scalar, subtract_scalar};

}  // namespace klsda::kernels::detail
