#include <arm_neon.h>

#include "klsda/kernels.hpp"

namespace klsda::kernels::detail {
namespace {

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t acc02 = vdupq_n_f64(0.0);  // lanes 0,1
  float64x2_t acc13 = vdupq_n_f64(0.0);  // lanes 2,3
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc02 = vfmaq_f64(acc02, vld1q_f64(a + i), vld1q_f64(b + i));
    acc13 = vfmaq_f64(acc13, vld1q_f64(a + i + 2), vld1q_f64(b + i + 2));
  }
  float64x2_t s = vaddq_f64(acc02, acc13);
  double r = vgetq_lane_f64(s, 0) + vgetq_lane_f64(s, 1);
  for (; i < n; ++i) r += a[i] * b[i];
  return r;
}

void axpy_neon(double alpha, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(alpha);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    vst1q_f64(y + i, vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i))));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

double squared_norm_neon(const double* x, std::size_t n) { return dot_neon(x, x, n); }

void subtract_neon(const double* a, const double* b, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) vst1q_f64(out + i, vsubq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
  for (; i < n; ++i) out[i] = a[i] - b[i];
}

}  // namespace

const Table kNeonTable{dot_neon, axpy_neon, squared_norm_neon, subtract_neon};

}  // namespace klsda::kernels::detail
