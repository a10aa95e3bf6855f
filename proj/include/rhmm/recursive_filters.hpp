#pragma once

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "rhmm/model.hpp"

namespace rhmm {

/// Unnormalized filters for the state, the jump counts J^{sr}, the
/// occupation times O^r and the auxiliary processes T^r(y), T^r(y^2).
///
/// Every filter is an N-vector. The jump filters are stored as
/// eta_j[(s * N + r) * N + m], the others as eta_o[r * N + m].
struct FilterBank {
  std::size_t n = 0;
  std::size_t k = 0;
  std::vector<double> eta_x;
  std::vector<double> eta_j;
  std::vector<double> eta_o;
  std::vector<double> eta_t1;
  std::vector<double> eta_t2;

  std::span<const double> jump(std::size_t s, std::size_t r) const {
    return {eta_j.data() + (s * n + r) * n, n};
  }
  std::span<const double> occupation(std::size_t r) const { return {eta_o.data() + r * n, n}; }
  std::span<const double> aux1(std::size_t r) const { return {eta_t1.data() + r * n, n}; }
  std::span<const double> aux2(std::size_t r) const { return {eta_t2.data() + r * n, n}; }

  double mass() const;
};

/// Conditional expectations given the observations so far.
struct FilterEstimates {
  std::vector<double> state;  ///< E[X_k | y_1..y_k]
  Matrix jumps;               ///< (s, r): expected number of r -> s transitions
  std::vector<double> occupation;
  std::vector<double> aux1;  ///< sum_l <X_{l-1}, e_r> y_l
  std::vector<double> aux2;  ///< sum_l <X_{l-1}, e_r> y_l^2
};

FilterBank init_filters(const StateDistribution& x0);

/// Pi (gammas .* v), the propagation shared by all filters.
std::vector<double> propagate(const RegimeModel& model, std::span<const double> gammas,
                              std::span<const double> v);

/// One filter recursion with observation y and per-state density ratios
/// `gammas`. Throws BreakdownError (step = new k) when a gamma or any
/// updated filter is not finite, or when the state filter loses all mass.
FilterBank step(const FilterBank& bank, const RegimeModel& model, std::span<const double> gammas,
                double y);

FilterEstimates normalize(const FilterBank& bank);

/// Divides every filter by <1, eta_x>; normalized quantities are unchanged.
FilterBank rescale(const FilterBank& bank);

using GammaFn = std::function<std::vector<double>(double)>;

/// Exact conditional expectations by summing over every chain path
/// x_0..x_k. Throws InvalidArgument when N^k exceeds 1e6.
FilterEstimates brute_force_oracle(const RegimeModel& model, const StateDistribution& x0,
                                   std::span<const double> ys, const GammaFn& gammas_fn);

}  // namespace rhmm
