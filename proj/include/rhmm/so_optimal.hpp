#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <cmath>
#include <functional>
#include <limits>
#include <random>
#include <string>
#include <vector>

namespace rhmm {

using Sampler = std::function<double(std::mt19937_64&)>;

/// Law of the ideal observation Y^id. Expectations use adaptive quadrature
/// when a density is available and a fixed Monte-Carlo sample otherwise.
class IdealLaw {
 public:
  static IdealLaw normal(double mean, double sd);
  /// Empirical law: `mc_size` draws of `sampler` fix the mean, the variance
  /// and every expectation.
  static IdealLaw from_sampler(Sampler sampler, std::size_t mc_size, std::uint64_t seed);

  double mean() const noexcept { return mean_; }
  double variance() const noexcept { return var_; }
  double sd() const { return std::sqrt(var_); }
  bool has_density() const noexcept { return static_cast<bool>(density_); }
  double draw(std::mt19937_64& rng) const { return sampler_(rng); }
  const Sampler& sampler() const noexcept { return sampler_; }
  std::string backend() const { return has_density() ? "quadrature" : "monte-carlo"; }

  /// E (|D|/rho - 1)_+ with D = Y^id - E Y^id.
  double positive_part(double rho) const;
  /// E min(|D|, rho)^2.
  double clipped_second_moment(double rho) const;

 private:
  double mean_ = 0.0;
  double var_ = 1.0;
  Sampler sampler_;
  std::function<double(double)> density_;  // of |D|, on [0, inf)
  double upper_ = 0.0;                      // integration cut-off for |D|
  std::vector<double> abs_dev_;             // |D| sample for the MC backend
};

struct SoProblem {
  IdealLaw law;
  double rate;
  double rho = std::numeric_limits<double>::quiet_NaN();
};

/// (1 - r)/r * E(|D|/rho - 1)_+ - 1.
double mass_residual(const IdealLaw& law, double rate, double rho);

/// Root of the mass condition by bisection. Throws InvalidArgument unless
/// 0 < rate < 1, BracketError if no sign change is found.
double solve_rho(const IdealLaw& law, double rate, double tol = 1e-13);

SoProblem make_problem(IdealLaw law, double rate);

/// E Y^id + H_rho(y - E Y^id).
double reconstruct(const SoProblem& p, double y);
std::array<double, 2> reconstruct(std::array<double, 2> mean, double rho, std::array<double, 2> y);

/// MSE of the clipped reconstruction under the least favorable
/// contamination: Var Y^id - (1-r) E min(|D|, rho)^2 - r rho^2.
double saddle_risk(const SoProblem& p);
/// Var Y^id - (1-r) E min(|D|, rho)^2, without the contamination term.
double saddle_risk_without_contamination_term(const SoProblem& p);

struct Contaminator {
  std::string name;
  Sampler sampler;
};

struct RiskEstimate {
  double mean;
  double se;
};

/// Monte-Carlo MSE E|f(Y^re) - Y^id|^2 with Y^re = (1-U) Y^id + U Y^di,
/// U ~ Bernoulli(rate). Uses its own streams for Y^id, U and Y^di, so two
/// calls with the same seed share the ideal draws and the switches.
RiskEstimate so_risk(const IdealLaw& law, double rate, const std::function<double(double)>& f,
                     const Sampler& contaminator, std::size_t draws, std::uint64_t seed);

struct ContaminatorCheck {
  std::string name;
  RiskEstimate risk;
  double diff_mean;  ///< risk minus the risk under P0, paired draws
  double diff_se;
  bool within;       ///< diff_mean <= 2 diff_se
};

struct ReconstructionCheck {
  std::string name;
  RiskEstimate risk;
  bool worse;  ///< risk under P0 is at least that of the clipped reconstruction
};

struct SaddleReport {
  double rate;
  double rho;
  double residual;
  std::string backend;
  double saddle_value;
  double uncorrected_value;
  RiskEstimate risk_p0;
  bool risk_matches;  ///< |risk_p0 - saddle_value| <= 2 se
  std::vector<ContaminatorCheck> contaminators;
  std::vector<ReconstructionCheck> reconstructions;
  std::size_t draws;
  std::uint64_t seed;
};

/// Default battery: point masses inside and outside the clipping ball,
/// symmetric two-point masses, wide normal and uniform laws.
std::vector<Contaminator> default_contaminators(const SoProblem& p);

SaddleReport verify_saddle_point(const SoProblem& p, const std::vector<Contaminator>& alternatives,
                                 std::size_t draws, std::uint64_t seed);

}  // namespace rhmm
