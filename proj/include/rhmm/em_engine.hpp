#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rhmm/initialization.hpp"
#include "rhmm/measure_change.hpp"
#include "rhmm/model.hpp"
#include "rhmm/recursive_filters.hpp"
#include "rhmm/robust_core.hpp"

namespace rhmm {

enum class Mode { classical, robust };
enum class InitMethod { automatic, classical, robust };
enum class Estimator { automatic, mle, mbre };
/// standard: N(0,1); sd / mad: N(0, sigma_bar^2) with sigma_bar the sample sd
/// or the normalized MAD of the observations seen so far.
enum class ReferenceChoice { automatic, standard, sd, mad };

std::string to_string(Mode m);
std::string to_string(InitMethod m);
std::string to_string(Estimator e);
std::string to_string(ReferenceChoice r);
Mode parse_mode(const std::string& s);

struct BatchConfig {
  std::size_t batch_len = 10;
  std::size_t init_len = 0;  ///< length of the first batch; 0 means 3 * batch_len
  Mode mode = Mode::classical;
  double alpha = 0.95;
  double mad_floor = 1e-4;  ///< sigma floor as a fraction of the MAD scale
  std::uint64_t seed = 1;
  InitMethod init = InitMethod::automatic;          ///< classical mode: classical, robust: robust
  Estimator estimator = Estimator::automatic;       ///< classical mode: mle, robust: mbre
  ReferenceChoice reference = ReferenceChoice::automatic;  ///< classical: standard, robust: mad
  Redistribution redistribution = Redistribution::random;
  TransitionStart pi_start = TransitionStart::frequencies;
  bool recalibrate = true;  ///< false: clipping constants of the first batch are reused
  std::size_t mc_size = 10000;
  std::size_t consistency_reps = 2000;
  double outlier_q = 0.01;
  double freeze_eps = 1e-6;
  GmmOptions gmm;

  /// Throws InvalidArgument for inconsistent settings.
  void validate() const;
  std::size_t first_batch_len() const { return init_len == 0 ? 3 * batch_len : init_len; }
  InitMethod resolved_init() const;
  Estimator resolved_estimator() const;
  ReferenceChoice resolved_reference() const;
};

/// Per-observation memberships of the current batch. Row l holds, for each
/// state i, the filter of X_k restricted to paths with X_{l-1} = e_i; its
/// total mass is the unnormalized smoothed probability of that event.
class MembershipTracker {
 public:
  explicit MembershipTracker(std::size_t n_states) : n_(n_states) {}

  /// Propagates stored rows with the step's gammas, then opens the row of
  /// the new observation from the state filter before the step.
  void advance(const RegimeModel& model, std::span<const double> gammas,
               std::span<const double> eta_x_before);
  void scale(double factor);
  void clear() { rows_.clear(); }

  std::size_t size() const noexcept { return rows_.size(); }
  std::size_t n_states() const noexcept { return n_; }
  double mass(std::size_t l, std::size_t i) const;

 private:
  std::size_t n_;
  std::vector<std::vector<double>> rows_;  // row l: N blocks of N entries
};

/// w0(l, i) = smoothed mass of X_{l-1} = e_i over the occupation filter of
/// state i, for the observations of the current batch.
struct WeightTriangle {
  Matrix w;                        ///< batch_size x N
  Matrix masses;                   ///< unnormalized smoothed memberships
  std::vector<double> gain;        ///< column sums: share of the batch in O^i
  std::vector<double> occupation;  ///< normalized O^i at batch end

  std::size_t size() const noexcept { return w.rows(); }
  std::size_t n_states() const noexcept { return w.cols(); }
  /// max_l w0^2 / sum_l w0^2 per state (0 for an empty column).
  std::vector<double> noether() const;
  /// Memberships normalized over states for each observation.
  Matrix state_memberships() const;
};

WeightTriangle build_weight_triangle(const MembershipTracker& tracker, const FilterBank& bank);

struct ModelUpdate {
  std::vector<double> drift;
  std::vector<double> vol;
  Matrix transition;
  std::vector<bool> frozen;
};

/// Quotient estimates from the normalized filters. States with occupation
/// at or below eps keep the previous parameters. Throws Error if a variance
/// radicand is below -1e-12.
ModelUpdate m_step_classical(const FilterEstimates& est, const RegimeModel& prev, double eps);

/// The same drift and vol, written as weighted sums over the batch.
struct WeightedSums {
  std::vector<double> drift;
  std::vector<double> vol;
};
WeightedSums m1_weighted_sums(const WeightTriangle& tri, std::span<const double> ys);

struct RobustM1Options {
  MbreConstants consts;
  bool first_batch = false;
  double sigma_floor = 0.0;
  std::size_t consistency_reps = 2000;
  std::uint64_t seed = 1;
};

/// First batch: weighted median and scaled weighted MAD. Later batches:
/// one-step updates f0 + s0 sum w0 psi_loc(u), s0 exp(sum w0 psi_scale(u)).
/// States listed in `frozen` keep their previous values.
WeightedSums m1_robust(const WeightTriangle& tri, std::span<const double> ys,
                       std::span<const double> prev_drift, std::span<const double> prev_vol,
                       const std::vector<bool>& frozen, const RobustM1Options& opt);

/// J^{sr}/O^r with columns renormalized; frozen states keep their column.
Matrix m2_pi(const FilterEstimates& est, const RegimeModel& prev, double eps);

struct OutlierScore {
  double score;
  bool flagged;
};

/// Upper 1-q quantile of |(Z, Z^2 - 1)|, Z standard normal, by Monte Carlo.
double outlier_threshold(double q, std::size_t mc_size, std::uint64_t seed);

/// score_l = sum_i p_{l,i} |(u, u^2 - 1)|, u = (y_l - f_i)/sigma_i, with p the
/// memberships normalized over states.
std::vector<OutlierScore> flag_outliers(const WeightTriangle& tri, std::span<const double> ys,
                                        const RegimeModel& model, double threshold);

struct StepRecord {
  std::size_t index;  ///< 1-based time of the observation
  std::size_t batch;  ///< 1-based
  double y;
  double forecast;  ///< prediction of y made before it was observed
  std::vector<double> filtered;    ///< state filter after the observation
  std::vector<double> membership;  ///< smoothed within the batch, at batch end
  double score;
  bool flagged;
};

struct BatchRecord {
  std::size_t index;  ///< 1-based
  std::size_t first;  ///< 1-based time of its first observation
  std::size_t last;   ///< 1-based time of its last observation
  std::vector<double> drift;
  std::vector<double> vol;
  Matrix transition;
  double sigma_bar;
  std::optional<LambdaCalibration> calibration;
  std::string note;
  std::vector<double> gain;
  std::vector<double> noether;
  std::vector<bool> frozen;
  std::size_t flagged;
};

struct BreakdownInfo {
  std::size_t step;
  double y;
  std::string quantity;
  std::string message;
};

struct EstimationTrace {
  BatchConfig config;
  std::size_t n_states = 0;
  std::optional<InitResult> init;
  std::vector<StepRecord> steps;
  std::vector<BatchRecord> batches;
  std::optional<BreakdownInfo> breakdown;
  double flag_threshold = 0.0;

  bool broke_down() const noexcept { return breakdown.has_value(); }
  /// Estimates after the last completed batch (the initial model if none).
  RegimeModel final_model() const;
};

/// Batch EM over the series. A BreakdownError in the filters is recorded in
/// the trace and ends the run.
EstimationTrace run(std::span<const double> ys, std::size_t n_states, const BatchConfig& cfg);

/// Same, starting from given values instead of step (0).
EstimationTrace run(std::span<const double> ys, const RegimeModel& start,
                    const StateDistribution& x0, const BatchConfig& cfg);

}  // namespace rhmm
