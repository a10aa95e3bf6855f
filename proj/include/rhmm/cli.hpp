#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "rhmm/em_engine.hpp"
#include "rhmm/model.hpp"

namespace rhmm::cli {

inline constexpr int exit_ok = 0;
inline constexpr int exit_error = 1;
inline constexpr int exit_usage = 2;
inline constexpr int exit_breakdown = 3;

inline constexpr const char* schema_version = "rhmm-csv/1";
inline constexpr const char* out_dir_env = "RHMM_OUT_DIR";

struct RunConfig {
  std::string subcommand;
  std::optional<std::filesystem::path> input;
  std::filesystem::path out;
  std::size_t states = 2;
  BatchConfig batch;
  std::string contamination = "none";
  std::size_t horizon = 192;
  std::vector<double> drift;       ///< simulation model; empty means the demo model
  std::vector<double> vol;
  std::vector<double> transition;  ///< row-major, column-stochastic
  double rate = 0.1;               ///< verify-theorem contamination radius
  double ideal_sd = 1.0;
  std::size_t draws = 1000000;
  std::string figure_modes = "both";
};

/// Output directory when --out is absent: $RHMM_OUT_DIR, else "rhmm_out".
std::filesystem::path default_out_dir();

/// Parses argv into a config. --from-manifest loads the recorded config of an
/// earlier run; flags given explicitly on the command line still apply.
/// Throws InvalidArgument for inconsistent flags.
RunConfig parse_args(int argc, const char* const* argv);

/// The simulation model of `cfg` (the demo model unless overridden).
RegimeModel simulation_model(const RunConfig& cfg);

std::string batches_csv(const EstimationTrace& trace);
std::string steps_csv(const EstimationTrace& trace);

int cmd_simulate(const RunConfig& cfg);
int cmd_estimate(const RunConfig& cfg);
int cmd_verify_theorem(const RunConfig& cfg);
int cmd_figures(const RunConfig& cfg);

/// Full entry point: parse, dispatch, report errors on stderr, return the
/// exit code.
int main(int argc, const char* const* argv);

}  // namespace rhmm::cli
