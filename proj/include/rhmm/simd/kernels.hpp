#pragma once

// Data-parallel inner loops used by the Monte-Carlo calibration and the
// minimax quadrature fallbacks. Every kernel has a scalar reference in
// `scalar::` and vectorized variants in `avx2::` (x86-64 with AVX2+FMA) and
// `neon::` (AArch64). The unqualified functions dispatch at runtime.

#include <cstddef>
#include <span>
#include <string_view>

namespace rhmm::simd {

enum class Level { scalar, avx2, neon };

/// Best level supported by the running CPU, unless the environment variable
/// RHMM_SIMD=scalar forces the reference path. Resolved once per process.
Level active_level();
std::string_view level_name(Level level);
bool level_supported(Level level);

/// Per-state constants of a Gaussian mixture density ratio against a
/// centered normal reference with scale sigma_bar.
///
///   log_coef[i] = log(p_i) - log(sigma_i) + log(sigma_bar)
///   drift[i]    = f_i
///   inv_vol[i]  = 1 / sigma_i
///   inv_ref     = 1 / sigma_bar
struct MixtureRatio {
  std::span<const double> log_coef;
  std::span<const double> drift;
  std::span<const double> inv_vol;
  double inv_ref;
};

namespace scalar {
void exp_array(std::span<const double> x, std::span<double> out);
void sqrt_mixture_ratio(const MixtureRatio& m, std::span<const double> ys, std::span<double> out);
double clipped_square_mean(std::span<const double> v, double center, double b);
double positive_part_mean(std::span<const double> d, double rho);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
void exp_array(std::span<const double> x, std::span<double> out);
void sqrt_mixture_ratio(const MixtureRatio& m, std::span<const double> ys, std::span<double> out);
double clipped_square_mean(std::span<const double> v, double center, double b);
double positive_part_mean(std::span<const double> d, double rho);
}  // namespace avx2
#endif

#if defined(__aarch64__)
namespace neon {
double clipped_square_mean(std::span<const double> v, double center, double b);
double positive_part_mean(std::span<const double> d, double rho);
}  // namespace neon
#endif

/// out[k] = exp(x[k]); 0 below the subnormal range, +inf above overflow.
void exp_array(std::span<const double> x, std::span<double> out);

/// out[k] = sqrt( sum_i exp(log_coef[i] - u_i^2/2 + (y_k*inv_ref)^2/2) ),
/// u_i = (y_k - f_i) * inv_vol[i]; i.e. the square root of the mixture
/// density divided by the reference density at y_k.
void sqrt_mixture_ratio(const MixtureRatio& m, std::span<const double> ys, std::span<double> out);

/// Mean over k of (center + clamp(v[k] - center, -b, b))^2. b may be +inf.
double clipped_square_mean(std::span<const double> v, double center, double b);

/// Mean over k of max(|d[k]| / rho - 1, 0).
double positive_part_mean(std::span<const double> d, double rho);

}  // namespace rhmm::simd
