#include <algorithm>
#include <cmath>

#include "rhmm/simd/kernels.hpp"

namespace rhmm::simd::scalar {

void exp_array(std::span<const double> x, std::span<double> out) {
  for (std::size_t k = 0; k < x.size(); ++k) out[k] = std::exp(x[k]);
}

void sqrt_mixture_ratio(const MixtureRatio& m, std::span<const double> ys, std::span<double> out) {
  const std::size_t n = m.drift.size();
  for (std::size_t k = 0; k < ys.size(); ++k) {
    const double y = ys[k];
    const double v = y * m.inv_ref;
    const double ref = 0.5 * v * v;
    double top = -HUGE_VAL;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (y - m.drift[i]) * m.inv_vol[i];
      top = std::max(top, m.log_coef[i] - 0.5 * u * u + ref);
    }
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double u = (y - m.drift[i]) * m.inv_vol[i];
      s += std::exp(m.log_coef[i] - 0.5 * u * u + ref - top);
    }
    out[k] = std::exp(0.5 * top) * std::sqrt(s);
  }
}

double clipped_square_mean(std::span<const double> v, double center, double b) {
  if (v.empty()) return 0.0;
  double acc = 0.0;
  for (double x : v) {
    const double c = center + std::clamp(x - center, -b, b);
    acc += c * c;
  }
  return acc / static_cast<double>(v.size());
}

double positive_part_mean(std::span<const double> d, double rho) {
  if (d.empty()) return 0.0;
  const double inv = 1.0 / rho;
  double acc = 0.0;
  for (double x : d) acc += std::max(std::abs(x) * inv - 1.0, 0.0);
  return acc / static_cast<double>(d.size());
}

}  // namespace rhmm::simd::scalar
