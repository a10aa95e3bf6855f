#include "rhmm/robust_core.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <random>

#include "rhmm/error.hpp"

namespace rhmm {

double huber_clip(double z, double b) {
  if (!(b > 0.0)) throw InvalidArgument("huber_clip: clipping height must be positive");
  const double a = std::abs(z);
  return a <= b ? z : z * (b / a);
}

std::array<double, 2> huber_clip(std::array<double, 2> z, double b) {
  if (!(b > 0.0)) throw InvalidArgument("huber_clip: clipping height must be positive");
  const double norm = std::hypot(z[0], z[1]);
  if (norm <= b) return z;
  const double s = b / norm;
  return {z[0] * s, z[1] * s};
}

WeightedSample::WeightedSample(std::vector<double> values, std::vector<double> weights)
    : values_(std::move(values)), weights_(std::move(weights)) {
  if (values_.empty()) throw InvalidArgument("WeightedSample: empty sample");
  if (values_.size() != weights_.size()) {
    throw InvalidArgument("WeightedSample: values and weights differ in length");
  }
  double total = 0.0;
  for (double w : weights_) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw InvalidArgument("WeightedSample: weights must be finite and non-negative");
    }
    total += w;
  }
  if (!(total > 0.0)) throw InvalidArgument("WeightedSample: all weights are zero");
}

double weighted_median(std::span<const double> values, std::span<const double> weights) {
  if (values.size() != weights.size() || values.empty()) {
    throw InvalidArgument("weighted_median: values and weights must be nonempty and equal length");
  }
  std::vector<std::size_t> idx;
  idx.reserve(values.size());
  double total = 0.0;
  for (std::size_t j = 0; j < values.size(); ++j) {
    if (!(weights[j] >= 0.0) || !std::isfinite(weights[j])) {
      throw InvalidArgument("weighted_median: weights must be finite and non-negative");
    }
    if (weights[j] > 0.0) {
      idx.push_back(j);
      total += weights[j];
    }
  }
  if (idx.empty()) throw InvalidArgument("weighted_median: all weights are zero");
  std::sort(idx.begin(), idx.end(), [&](std::size_t a, std::size_t b) {
    return values[a] < values[b];
  });

  const double half = 0.5 * total;
  const double tol = 1e-12 * total;
  double cum = 0.0;
  for (std::size_t p = 0; p < idx.size(); ++p) {
    cum += weights[idx[p]];
    if (cum >= half - tol) {
      // Left mass exactly one half: the objective is flat up to the next point.
      if (std::abs(cum - half) <= tol && p + 1 < idx.size()) {
        return 0.5 * (values[idx[p]] + values[idx[p + 1]]);
      }
      return values[idx[p]];
    }
  }
  return values[idx.back()];
}

double weighted_median(const WeightedSample& s) { return weighted_median(s.values(), s.weights()); }

double weighted_mad(const WeightedSample& s, double center, double consistency) {
  if (!(consistency > 0.0)) throw InvalidArgument("weighted_mad: consistency must be positive");
  std::vector<double> dev(s.size());
  for (std::size_t j = 0; j < s.size(); ++j) dev[j] = std::abs(s.values()[j] - center);
  return weighted_median(dev, s.weights()) / consistency;
}

double mc_consistency_factor(std::span<const double> weights, std::size_t reps,
                             std::uint64_t seed) {
  if (weights.empty()) throw InvalidArgument("mc_consistency_factor: no weights");
  if (reps == 0) throw InvalidArgument("mc_consistency_factor: reps must be positive");
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::vector<double> draws(weights.size());
  double acc = 0.0;
  for (std::size_t r = 0; r < reps; ++r) {
    for (double& d : draws) d = std::abs(normal(rng));
    acc += weighted_median(draws, weights);
  }
  return acc / static_cast<double>(reps);
}

Fraction fsbp(std::span<const double> weights) {
  if (weights.empty()) throw InvalidArgument("fsbp: no weights");
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0)) throw InvalidArgument("fsbp: weights have no mass");
  std::vector<double> w(weights.begin(), weights.end());
  std::sort(w.begin(), w.end(), std::greater<>());
  double cum = 0.0;
  for (std::size_t j = 0; j < w.size(); ++j) {
    cum += w[j] / total;
    if (cum >= 0.5 - 1e-12) return {j + 1, w.size()};
  }
  return {w.size(), w.size()};
}

MbrePsi mbre_if(double u, const MbreConstants& c) {
  if (!std::isfinite(u)) throw InvalidArgument("mbre_if: argument must be finite");
  const double y1 = u;
  const double y2 = c.A * (u * u - 1.0) - c.a;
  const double norm = std::hypot(y1, y2);
  if (!(norm > 0.0)) throw InvalidArgument("mbre_if: Y(u) vanishes");
  return {c.b * y1 / norm, c.b * y2 / norm};
}

}  // namespace rhmm
