#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "rhmm/model.hpp"

namespace rhmm {

struct MixtureFit {
  std::size_t n_components = 0;
  std::vector<double> means;
  std::vector<double> sds;
  std::vector<double> frequencies;
  Matrix responsibilities;  ///< T x components, rows sum to one
  double log_likelihood = 0.0;
  std::size_t iterations = 0;
  std::size_t rejected_restarts = 0;
  std::size_t collapsed = 0;  ///< components pinned at the sd floor
};

struct GmmOptions {
  std::size_t restarts = 10;
  std::size_t max_iter = 500;
  double tol = 1e-10;
  /// Components allowed to collapse onto a single value before a restart
  /// is discarded. Restarts with fewer collapsed components are preferred.
  std::size_t max_collapsed = 0;
};

/// Univariate Gaussian mixture by EM from k-means++ seeding, best of
/// `restarts` by log-likelihood. Components are sorted by ascending mean.
/// Standard deviations are floored at 1e-6 times the overall MAD; a
/// component that reaches the floor is pinned there. Throws Error when every
/// restart has more than `max_collapsed` pinned components.
MixtureFit fit_gmm(std::span<const double> ys, std::size_t n_components, std::uint64_t seed,
                   const GmmOptions& opt = {});

enum class Redistribution { random, posterior };

/// frequencies: every column of Pi equals the cluster frequencies.
/// transitions: Pi(j, i) = sum_t w(t-1, i) w(t, j) / sum_t w(t-1, i) from
/// consecutive memberships.
enum class TransitionStart { frequencies, transitions };

/// Soft transition counts between consecutive rows of a membership matrix,
/// as a column-stochastic matrix. Columns without mass fall back to `fallback`.
Matrix transition_counts(const Matrix& weights, std::span<const double> fallback);

struct InitResult {
  RegimeModel model;
  StateDistribution x0;
  Matrix weights;  ///< T x N memberships used for the estimates
  MixtureFit fit;
  std::optional<std::size_t> noise_component;
  std::string method;
};

/// Component moments as f, sigma; every column of Pi and x0 equal to the
/// component frequencies. If every restart collapses a component, the fit is
/// redone allowing that and collapsed components get the window's sd.
InitResult classical_init(std::span<const double> ys, std::size_t n_states, std::uint64_t seed,
                          const GmmOptions& opt = {},
                          TransitionStart pi_start = TransitionStart::frequencies);

/// N+1 components; the least frequent one (ties: the widest) is noise. Its
/// responsibility is moved to one of the other components drawn with
/// probability proportional to their frequencies (`random`) or split by
/// their posterior probabilities (`posterior`). f and sigma are then the
/// weighted median and weighted MAD with a Monte-Carlo consistency factor.
InitResult robust_init(std::span<const double> ys, std::size_t n_states, std::uint64_t seed,
                       Redistribution redistribution = Redistribution::random,
                       const GmmOptions& opt = {},
                       TransitionStart pi_start = TransitionStart::frequencies);

}  // namespace rhmm
