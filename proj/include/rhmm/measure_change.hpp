#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include "rhmm/model.hpp"

namespace rhmm {

double normal_pdf(double z);
double normal_cdf(double z);
double normal_quantile(double p);

/// Centered normal reference law N(0, sigma_bar^2) of the measure change.
struct ReferenceMeasure {
  double sigma_bar = 1.0;

  /// Throws InvalidArgument unless sigma_bar is positive and finite.
  explicit ReferenceMeasure(double sigma_bar = 1.0);

  static ReferenceMeasure standard() { return ReferenceMeasure(1.0); }
  /// MAD of all observations about their median, scaled by 1/Phi^{-1}(3/4).
  static ReferenceMeasure from_mad(std::span<const double> ys);
  /// Sample standard deviation of all observations.
  static ReferenceMeasure from_sd(std::span<const double> ys);
};

/// Clipping constants for the robust likelihood ratio.
struct LambdaCalibration {
  double alpha = 1.0;        ///< target mean of the clipped ratio
  double clip_b = 0.0;       ///< clipping height on the sqrt scale; +inf means no clipping
  double consistency = 1.0;  ///< c' so that the rescaled clipped ratio has mean one
  double mean_sqrt = 1.0;    ///< E sqrt(lambda~) under the reference law
};

/// Component density ratio phi((y - f_i)/sigma_i) / (sigma_i * ref(y)),
/// evaluated literally in double precision. Throws BreakdownError (step 0)
/// naming the state and y when the value is not finite.
double gamma(const RegimeModel& model, const ReferenceMeasure& ref, double y, std::size_t i);
double gamma(const RegimeModel& model, double y, std::size_t i);

/// log of gamma(), computed without ever forming the ratio.
double log_gamma(const RegimeModel& model, const ReferenceMeasure& ref, double y, std::size_t i);

/// Mixture of the component ratios under `state_dist`. Throws
/// BreakdownError when an intermediate is not finite.
double lambda_tilde(const RegimeModel& model, const ReferenceMeasure& ref, double y,
                    const StateDistribution& state_dist);

/// Solves E[(m + H_b(sqrt(lambda~) - m))^2] = alpha by bisection over b,
/// with y drawn from the reference law, m = E sqrt(lambda~). alpha == 1
/// means no clipping. Throws BracketError when alpha is not attainable.
LambdaCalibration calibrate_clipping(const RegimeModel& model, const ReferenceMeasure& ref,
                                     const StateDistribution& state_dist, double alpha,
                                     std::size_t mc_size, std::uint64_t seed);

/// Same, with caller-supplied standard normal draws (common random numbers).
LambdaCalibration calibrate_clipping(const RegimeModel& model, const ReferenceMeasure& ref,
                                     const StateDistribution& state_dist, double alpha,
                                     std::span<const double> standard_draws);

/// c' * (m + H_b(sqrt(lambda~(y)) - m))^2. Bounded by c' (m + b)^2 for every y.
double lambda_bar(const RegimeModel& model, const ReferenceMeasure& ref,
                  const LambdaCalibration& calib, double y,
                  const StateDistribution& state_dist);

/// Per-state clipped ratios c' (m + H_b(sqrt(Gamma~_i(y)) - m))^2 fed to the
/// filters in robust mode. Computed in log space, so finite for every y.
/// When every entry vanishes the observation carries no state information
/// and a vector of ones is returned.
std::vector<double> robust_gammas(const RegimeModel& model, const ReferenceMeasure& ref,
                                  const LambdaCalibration& calib, double y);

}  // namespace rhmm
