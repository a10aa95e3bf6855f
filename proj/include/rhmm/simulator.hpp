#pragma once

#include <cstddef>
#include <cstdint>
#include <ostream>
#include <string>
#include <vector>

#include "rhmm/model.hpp"
#include "rhmm/so_optimal.hpp"

namespace rhmm {

struct SimulatedPath {
  std::vector<std::size_t> states;  ///< x_0..x_T
  ReturnSeries clean{std::vector<double>{0.0}};
  ReturnSeries observed{std::vector<double>{0.0}};
  std::vector<bool> outlier_mask;

  std::size_t size() const noexcept { return clean.size(); }
};

struct ContaminationSpec {
  enum class Mechanism { none, fixed_positions, iid_switch };

  Mechanism mechanism = Mechanism::none;
  double rate = 0.0;
  std::vector<std::size_t> positions;  ///< 1-based
  std::vector<double> values;          ///< replacement value per position
  Sampler distortion;                  ///< law of the replacement for iid_switch
  std::string label = "none";

  static ContaminationSpec none();
  static ContaminationSpec fixed(std::vector<std::size_t> positions, std::vector<double> values,
                                 std::string label = "fixed");
  static ContaminationSpec iid(double rate, Sampler distortion, std::string label = "iid");
};

/// y_k = f_{x_{k-1}} + sigma_{x_{k-1}} w_k, x_k drawn from column x_{k-1} of Pi.
SimulatedPath simulate_hmm(const RegimeModel& model, const StateDistribution& x0,
                           std::size_t horizon, std::uint64_t seed);

/// Replaces observations according to `spec`. Clean returns and states are
/// never touched. Throws InvalidArgument for positions outside 1..T.
SimulatedPath contaminate(const SimulatedPath& path, const ContaminationSpec& spec,
                          std::uint64_t seed);

/// Sampler of the least favorable distortion law, with density proportional
/// to (|y - E Y^id|/rho - 1)_+ against the ideal law, by rejection from the
/// ideal sampler truncated at 12 standard deviations. Throws InvalidArgument
/// when rho violates the mass condition by more than 1e-6.
Sampler least_favorable_contaminator(const IdealLaw& law, double rate, double rho);

/// Two-regime model of the demo series, in percent per period: a bear state
/// (f=-2, sigma=6) and a bull state (f=1.2, sigma=3).
RegimeModel demo_model();
inline constexpr std::size_t demo_horizon = 192;

/// Outlier positions of the planted-outlier experiment.
std::vector<std::size_t> planted_positions();

/// Magnitude in stationary standard deviations for "considerable" (6) and
/// "severe" (25).
double preset_multiplier(const std::string& preset);

/// Fixed-position contamination at the planted positions with value
/// mean + multiplier * sd of the stationary return law.
ContaminationSpec preset_contamination(const std::string& preset, const RegimeModel& model);

/// Parses "none", "considerable", "severe" or "fixed:POS=VALUE[,POS=VALUE...]".
ContaminationSpec parse_contamination(const std::string& text, const RegimeModel& model);

/// CSV with columns index,state,clean,observed,is_outlier (states 1-based,
/// state column holds x_{k-1}, the state that generated y_k).
void write_path_csv(std::ostream& os, const SimulatedPath& path);

}  // namespace rhmm
