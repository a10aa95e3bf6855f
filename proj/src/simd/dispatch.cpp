#include <cstdlib>
#include <string>

#include "rhmm/simd/kernels.hpp"

namespace rhmm::simd {

namespace {

Level detect() {
  if (const char* env = std::getenv("RHMM_SIMD"); env && std::string(env) == "scalar") {
    return Level::scalar;
  }
  if (level_supported(Level::avx2)) return Level::avx2;
  if (level_supported(Level::neon)) return Level::neon;
  return Level::scalar;
}

}  // namespace

bool level_supported(Level level) {
  switch (level) {
    case Level::scalar:
      return true;
    case Level::avx2:
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
      return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
      return false;
#endif
    case Level::neon:
#if defined(__aarch64__)
      return true;
#else
      return false;
#endif
  }
  return false;
}

Level active_level() {
  static const Level level = detect();
  return level;
}

std::string_view level_name(Level level) {
  switch (level) {
    case Level::scalar: return "scalar";
    case Level::avx2: return "avx2";
    case Level::neon: return "neon";
  }
  return "unknown";
}

void exp_array(std::span<const double> x, std::span<double> out) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_level() == Level::avx2) return avx2::exp_array(x, out);
#endif
  scalar::exp_array(x, out);
}

void sqrt_mixture_ratio(const MixtureRatio& m, std::span<const double> ys, std::span<double> out) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_level() == Level::avx2) return avx2::sqrt_mixture_ratio(m, ys, out);
#endif
  scalar::sqrt_mixture_ratio(m, ys, out);
}

double clipped_square_mean(std::span<const double> v, double center, double b) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_level() == Level::avx2) return avx2::clipped_square_mean(v, center, b);
#endif
#if defined(__aarch64__)
  if (active_level() == Level::neon) return neon::clipped_square_mean(v, center, b);
#endif
  return scalar::clipped_square_mean(v, center, b);
}

double positive_part_mean(std::span<const double> d, double rho) {
#if defined(__x86_64__) || defined(_M_X64)
  if (active_level() == Level::avx2) return avx2::positive_part_mean(d, rho);
#endif
#if defined(__aarch64__)
  if (active_level() == Level::neon) return neon::positive_part_mean(d, rho);
#endif
  return scalar::positive_part_mean(d, rho);
}

}  // namespace rhmm::simd
