#include "rhmm/model.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "rhmm/error.hpp"

namespace rhmm {

namespace {

constexpr double kSimplexTol = 1e-12;

}  // namespace

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

Matrix Matrix::from_rows(std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t n_rows = rows.size();
  const std::size_t n_cols = n_rows == 0 ? 0 : rows.begin()->size();
  Matrix m(n_rows, n_cols);
  std::size_t r = 0;
  for (const auto& row : rows) {
    if (row.size() != n_cols) throw InvalidArgument("Matrix::from_rows: ragged rows");
    std::size_t c = 0;
    for (double v : row) m(r, c++) = v;
    ++r;
  }
  return m;
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

RegimeModel::RegimeModel(Matrix transition, std::vector<double> drift, std::vector<double> vol)
    : transition_(std::move(transition)), drift_(std::move(drift)), vol_(std::move(vol)) {
  const std::size_t n = drift_.size();
  if (n == 0) throw InvalidArgument("RegimeModel: need at least one state");
  if (vol_.size() != n || transition_.rows() != n || transition_.cols() != n) {
    throw InvalidArgument("RegimeModel: inconsistent dimensions");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(drift_[i])) throw InvalidArgument("RegimeModel: non-finite drift");
    if (!(vol_[i] > 0.0) || !std::isfinite(vol_[i])) {
      throw InvalidArgument("RegimeModel: vol of state " + std::to_string(i + 1) +
                            " must be positive and finite");
    }
    double col = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double p = transition_(j, i);
      if (!(p >= 0.0 && p <= 1.0)) {
        throw InvalidArgument("RegimeModel: transition entry outside [0,1]");
      }
      col += p;
    }
    if (std::abs(col - 1.0) > kSimplexTol) {
      throw InvalidArgument("RegimeModel: column " + std::to_string(i + 1) +
                            " of the transition matrix does not sum to 1");
    }
  }
}

StateDistribution::StateDistribution(std::vector<double> probs) : probs_(std::move(probs)) {
  if (probs_.empty()) throw InvalidArgument("StateDistribution: empty");
  double total = 0.0;
  for (double p : probs_) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw InvalidArgument("StateDistribution: negative or non-finite entry");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > kSimplexTol) {
    throw InvalidArgument("StateDistribution: entries do not sum to 1");
  }
}

StateDistribution StateDistribution::normalized(std::span<const double> weights) {
  const double total = std::accumulate(weights.begin(), weights.end(), 0.0);
  if (!(total > 0.0) || !std::isfinite(total)) {
    throw InvalidArgument("StateDistribution::normalized: no positive finite mass");
  }
  std::vector<double> p(weights.begin(), weights.end());
  for (double& v : p) v /= total;
  // Division can leave the sum a few ulps away from one; fold the
  // remainder into the largest entry.
  const double drift = 1.0 - std::accumulate(p.begin(), p.end(), 0.0);
  *std::max_element(p.begin(), p.end()) += drift;
  return StateDistribution(std::move(p));
}

StateDistribution StateDistribution::uniform(std::size_t n) {
  if (n == 0) throw InvalidArgument("StateDistribution::uniform: n must be positive");
  std::vector<double> w(n, 1.0);
  return normalized(w);
}

StateDistribution StateDistribution::point_mass(std::size_t n, std::size_t state) {
  if (state >= n) throw InvalidArgument("StateDistribution::point_mass: state out of range");
  std::vector<double> p(n, 0.0);
  p[state] = 1.0;
  return StateDistribution(std::move(p));
}

ReturnSeries::ReturnSeries(std::vector<double> values, std::vector<std::string> timestamps)
    : values_(std::move(values)), timestamps_(std::move(timestamps)) {
  if (values_.empty()) throw InvalidArgument("ReturnSeries: need at least one value");
  if (!timestamps_.empty() && timestamps_.size() != values_.size()) {
    throw InvalidArgument("ReturnSeries: timestamp count does not match values");
  }
  for (std::size_t k = 0; k < values_.size(); ++k) {
    if (!std::isfinite(values_[k])) {
      throw InvalidArgument("ReturnSeries: non-finite value at index " + std::to_string(k + 1));
    }
  }
}

ReturnSeries ReturnSeries::prefix(std::size_t n) const {
  n = std::min(n, values_.size());
  std::vector<double> v(values_.begin(), values_.begin() + static_cast<std::ptrdiff_t>(n));
  std::vector<std::string> ts;
  if (!timestamps_.empty()) {
    ts.assign(timestamps_.begin(), timestamps_.begin() + static_cast<std::ptrdiff_t>(n));
  }
  return ReturnSeries(std::move(v), std::move(ts));
}

ReturnSeries returns_from_prices(std::span<const double> prices) {
  if (prices.size() < 2) throw InvalidArgument("returns_from_prices: need at least two prices");
  for (std::size_t k = 0; k < prices.size(); ++k) {
    if (!(prices[k] > 0.0) || !std::isfinite(prices[k])) {
      throw InvalidArgument("returns_from_prices: price at index " + std::to_string(k + 1) +
                            " is not strictly positive");
    }
  }
  std::vector<double> out(prices.size() - 1);
  for (std::size_t k = 0; k + 1 < prices.size(); ++k) out[k] = std::log(prices[k + 1] / prices[k]);
  return ReturnSeries(std::move(out));
}

StateDistribution stationary_distribution(const RegimeModel& model, std::size_t max_iter,
                                          double tol) {
  const std::size_t n = model.n_states();
  const Matrix& pi = model.transition();
  std::vector<double> p(n, 1.0 / static_cast<double>(n));
  std::vector<double> next(n);
  double residual = 0.0;
  for (std::size_t it = 0; it < max_iter; ++it) {
    for (std::size_t j = 0; j < n; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += pi(j, i) * p[i];
      next[j] = s;
    }
    residual = 0.0;
    for (std::size_t j = 0; j < n; ++j) residual += std::abs(next[j] - p[j]);
    p.swap(next);
    if (residual < tol) return StateDistribution::normalized(p);
  }
  throw ConvergenceError("stationary_distribution: power iteration did not converge", residual);
}

MarginalMoments marginal_moments(const RegimeModel& model, const StateDistribution& dist) {
  double mean = 0.0;
  double second = 0.0;
  for (std::size_t i = 0; i < model.n_states(); ++i) {
    const double f = model.drift()[i];
    const double s = model.vol()[i];
    mean += dist[i] * f;
    second += dist[i] * (s * s + f * f);
  }
  return {mean, std::sqrt(std::max(second - mean * mean, 0.0))};
}

}  // namespace rhmm
