#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <vector>

#include "rhmm/measure_change.hpp"
#include "rhmm/model.hpp"
#include "rhmm/recursive_filters.hpp"

namespace rhmm::testing {

/// A small random model with observations, for path-enumeration checks.
struct OracleInstance {
  RegimeModel model;
  StateDistribution x0;
  std::vector<double> ys;
};

inline OracleInstance random_instance(std::size_t n, std::size_t k, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix pi(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += (pi(j, i) = 0.05 + u(rng));
    for (std::size_t j = 0; j < n; ++j) pi(j, i) /= s;
  }
  std::vector<double> f(n), sg(n), x(n);
  for (std::size_t i = 0; i < n; ++i) {
    f[i] = 2.0 * u(rng) - 1.0;
    sg[i] = 0.4 + u(rng);
    x[i] = 0.1 + u(rng);
  }
  std::vector<double> ys(k);
  for (double& y : ys) y = 3.0 * u(rng) - 1.5;
  return {RegimeModel(std::move(pi), std::move(f), std::move(sg)), StateDistribution::normalized(x),
          std::move(ys)};
}

inline GammaFn classical_gammas(const RegimeModel& m) {
  return [m](double y) {
    std::vector<double> g(m.n_states());
    for (std::size_t i = 0; i < g.size(); ++i) g[i] = gamma(m, y, i);
    return g;
  };
}

inline FilterEstimates run_filters(const OracleInstance& inst) {
  const GammaFn g = classical_gammas(inst.model);
  FilterBank b = init_filters(inst.x0);
  for (double y : inst.ys) b = rescale(step(b, inst.model, g(y), y));
  return normalize(b);
}

inline double rel_err(double a, double b, double scale) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), scale});
}

}  // namespace rhmm::testing
