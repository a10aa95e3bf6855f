#if defined(__aarch64__)

#include <arm_neon.h>

#include <algorithm>
#include <cmath>

#include "rhmm/simd/kernels.hpp"

namespace rhmm::simd::neon {

double clipped_square_mean(std::span<const double> v, double center, double b) {
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  const float64x2_t c = vdupq_n_f64(center);
  const float64x2_t hi = vdupq_n_f64(b);
  const float64x2_t lo = vdupq_n_f64(-b);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    float64x2_t d = vsubq_f64(vld1q_f64(v.data() + k), c);
    d = vaddq_f64(c, vminq_f64(vmaxq_f64(d, lo), hi));
    acc = vfmaq_f64(acc, d, d);
  }
  double s = vaddvq_f64(acc);
  for (; k < n; ++k) {
    const double t = center + std::clamp(v[k] - center, -b, b);
    s += t * t;
  }
  return s / static_cast<double>(n);
}

double positive_part_mean(std::span<const double> d, double rho) {
  const std::size_t n = d.size();
  if (n == 0) return 0.0;
  const double inv = 1.0 / rho;
  const float64x2_t vinv = vdupq_n_f64(inv);
  const float64x2_t one = vdupq_n_f64(1.0);
  const float64x2_t zero = vdupq_n_f64(0.0);
  float64x2_t acc = vdupq_n_f64(0.0);
  std::size_t k = 0;
  for (; k + 2 <= n; k += 2) {
    const float64x2_t a = vabsq_f64(vld1q_f64(d.data() + k));
    acc = vaddq_f64(acc, vmaxq_f64(vsubq_f64(vmulq_f64(a, vinv), one), zero));
  }
  double s = vaddvq_f64(acc);
  for (; k < n; ++k) s += std::max(std::abs(d[k]) * inv - 1.0, 0.0);
  return s / static_cast<double>(n);
}

}  // namespace rhmm::simd::neon

#endif
