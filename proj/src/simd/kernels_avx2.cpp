#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

#include <algorithm>
#include <cmath>
#include <limits>

#include "rhmm/simd/kernels.hpp"

#define RHMM_AVX2 __attribute__((target("avx2,fma")))

namespace rhmm::simd::avx2 {

namespace {

RHMM_AVX2 inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// 2^k for integral-valued k in [-1022, 1023].
RHMM_AVX2 inline __m256d pow2(__m256d k) {
  const __m128i k32 = _mm256_cvtpd_epi32(k);
  __m256i k64 = _mm256_cvtepi32_epi64(k32);
  k64 = _mm256_add_epi64(k64, _mm256_set1_epi64x(1023));
  return _mm256_castsi256_pd(_mm256_slli_epi64(k64, 52));
}

// exp(x) by range reduction x = n ln2 + r, |r| <= ln2/2, and a degree-13
// Taylor polynomial (truncation error below 1e-17 relative). The scale 2^n
// is applied in two halves so subnormal results and overflow to +inf come
// out of the multiplication itself.
RHMM_AVX2 inline __m256d exp_pd(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634074);
  const __m256d ln2_hi = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d ln2_lo = _mm256_set1_pd(1.42860682030941723212e-6);
  x = _mm256_max_pd(x, _mm256_set1_pd(-800.0));
  x = _mm256_min_pd(x, _mm256_set1_pd(800.0));
  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  static constexpr double kInvFact[] = {
      1.0 / 6227020800.0, 1.0 / 479001600.0, 1.0 / 39916800.0, 1.0 / 3628800.0,
      1.0 / 362880.0,     1.0 / 40320.0,     1.0 / 5040.0,      1.0 / 720.0,
      1.0 / 120.0,        1.0 / 24.0,        1.0 / 6.0,         0.5,
      1.0,                1.0};
  __m256d p = _mm256_set1_pd(kInvFact[0]);
  for (std::size_t j = 1; j < std::size(kInvFact); ++j) {
    p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(kInvFact[j]));
  }
  const __m256d n1 = _mm256_floor_pd(_mm256_mul_pd(n, _mm256_set1_pd(0.5)));
  const __m256d n2 = _mm256_sub_pd(n, n1);
  return _mm256_mul_pd(_mm256_mul_pd(p, pow2(n1)), pow2(n2));
}

}  // namespace

RHMM_AVX2 void exp_array(std::span<const double> x, std::span<double> out) {
  const std::size_t n = x.size();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    _mm256_storeu_pd(out.data() + k, exp_pd(_mm256_loadu_pd(x.data() + k)));
  }
  for (; k < n; ++k) out[k] = std::exp(x[k]);
}

RHMM_AVX2 void sqrt_mixture_ratio(const MixtureRatio& m, std::span<const double> ys,
                                  std::span<double> out) {
  const std::size_t n_states = m.drift.size();
  const std::size_t n = ys.size();
  const __m256d half = _mm256_set1_pd(0.5);
  const __m256d inv_ref = _mm256_set1_pd(m.inv_ref);
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d y = _mm256_loadu_pd(ys.data() + k);
    const __m256d v = _mm256_mul_pd(y, inv_ref);
    const __m256d ref = _mm256_mul_pd(half, _mm256_mul_pd(v, v));
    __m256d top = _mm256_set1_pd(-std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n_states; ++i) {
      const __m256d u = _mm256_mul_pd(_mm256_sub_pd(y, _mm256_set1_pd(m.drift[i])),
                                      _mm256_set1_pd(m.inv_vol[i]));
      const __m256d l = _mm256_add_pd(
          _mm256_fnmadd_pd(half, _mm256_mul_pd(u, u), _mm256_set1_pd(m.log_coef[i])), ref);
      top = _mm256_max_pd(top, l);
    }
    __m256d s = _mm256_setzero_pd();
    for (std::size_t i = 0; i < n_states; ++i) {
      const __m256d u = _mm256_mul_pd(_mm256_sub_pd(y, _mm256_set1_pd(m.drift[i])),
                                      _mm256_set1_pd(m.inv_vol[i]));
      const __m256d l = _mm256_add_pd(
          _mm256_fnmadd_pd(half, _mm256_mul_pd(u, u), _mm256_set1_pd(m.log_coef[i])), ref);
      s = _mm256_add_pd(s, exp_pd(_mm256_sub_pd(l, top)));
    }
    const __m256d res = _mm256_mul_pd(exp_pd(_mm256_mul_pd(half, top)), _mm256_sqrt_pd(s));
    _mm256_storeu_pd(out.data() + k, res);
  }
  if (k < n) scalar::sqrt_mixture_ratio(m, ys.subspan(k), out.subspan(k));
}

RHMM_AVX2 double clipped_square_mean(std::span<const double> v, double center, double b) {
  const std::size_t n = v.size();
  if (n == 0) return 0.0;
  const __m256d c = _mm256_set1_pd(center);
  const __m256d hi = _mm256_set1_pd(b);
  const __m256d lo = _mm256_set1_pd(-b);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 8 <= n; k += 8) {
    __m256d d0 = _mm256_sub_pd(_mm256_loadu_pd(v.data() + k), c);
    __m256d d1 = _mm256_sub_pd(_mm256_loadu_pd(v.data() + k + 4), c);
    d0 = _mm256_add_pd(c, _mm256_min_pd(_mm256_max_pd(d0, lo), hi));
    d1 = _mm256_add_pd(c, _mm256_min_pd(_mm256_max_pd(d1, lo), hi));
    acc0 = _mm256_fmadd_pd(d0, d0, acc0);
    acc1 = _mm256_fmadd_pd(d1, d1, acc1);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; k < n; ++k) {
    const double t = center + std::clamp(v[k] - center, -b, b);
    acc += t * t;
  }
  return acc / static_cast<double>(n);
}

RHMM_AVX2 double positive_part_mean(std::span<const double> d, double rho) {
  const std::size_t n = d.size();
  if (n == 0) return 0.0;
  const double inv = 1.0 / rho;
  const __m256d vinv = _mm256_set1_pd(inv);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d zero = _mm256_setzero_pd();
  const __m256d sign = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= n; k += 4) {
    const __m256d a = _mm256_andnot_pd(sign, _mm256_loadu_pd(d.data() + k));
    acc = _mm256_add_pd(acc, _mm256_max_pd(_mm256_fmsub_pd(a, vinv, one), zero));
  }
  double s = hsum(acc);
  for (; k < n; ++k) s += std::max(std::abs(d[k]) * inv - 1.0, 0.0);
  return s / static_cast<double>(n);
}

}  // namespace rhmm::simd::avx2

#endif
