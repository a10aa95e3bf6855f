#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace rhmm {

/// H_b(z) = z * min(1, b/|z|).
double huber_clip(double z, double b);
/// Euclidean-norm version of huber_clip for 2-vectors.
std::array<double, 2> huber_clip(std::array<double, 2> z, double b);

/// Observations with non-negative weights of positive total mass.
class WeightedSample {
 public:
  WeightedSample(std::vector<double> values, std::vector<double> weights);

  std::span<const double> values() const noexcept { return values_; }
  std::span<const double> weights() const noexcept { return weights_; }
  std::size_t size() const noexcept { return values_.size(); }

 private:
  std::vector<double> values_;
  std::vector<double> weights_;
};

/// argmin_f sum_j w_j |y_j - f|. When the minimizers form an interval the
/// midpoint is returned.
double weighted_median(const WeightedSample& s);
double weighted_median(std::span<const double> values, std::span<const double> weights);

/// Weighted median of |y_j - center| divided by `consistency`. Returns 0 for
/// a degenerate sample; flooring is the caller's business.
double weighted_mad(const WeightedSample& s, double center, double consistency);

/// Mean over `reps` Monte-Carlo replications of the weighted median of
/// |z_j|, z_j i.i.d. standard normal, using the given weights. Makes the
/// weighted MAD consistent for sigma at the normal law.
double mc_consistency_factor(std::span<const double> weights, std::size_t reps,
                             std::uint64_t seed);

/// Finite-sample breakdown point as an exact fraction.
struct Fraction {
  std::size_t num;
  std::size_t den;
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Fraction&) const = default;
};

/// k^{-1} min{ j0 : sum of the j0 largest normalized weights >= 1/2 }.
/// Zero-weight observations count towards k.
Fraction fsbp(std::span<const double> weights);

/// Constants of the most bias-robust location-scale influence function at
/// the standard normal.
struct MbreConstants {
  double A = 0.7917;
  double a = -0.4970;
  double b = 1.8546;
};

struct MbrePsi {
  double loc;
  double scale;
};

/// psi(u) = b * Y(u) / |Y(u)| with Y(u) = (u, A (u^2 - 1) - a).
MbrePsi mbre_if(double u, const MbreConstants& c = {});

}  // namespace rhmm
