#pragma once

#include <cstddef>
#include <initializer_list>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace rhmm {

/// Small dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows);
  static Matrix identity(std::size_t n);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }
  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }

  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::span<const double> data() const noexcept { return data_; }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// N-state Gaussian regime model.
///
/// The transition matrix is column-stochastic: entry (j, i) is the
/// probability of moving to state j given the chain is in state i. Every
/// consumer in the library indexes it this way.
class RegimeModel {
 public:
  /// Throws InvalidArgument unless the columns of `transition` are
  /// probability vectors (sums within 1e-12) and every vol is positive.
  RegimeModel(Matrix transition, std::vector<double> drift, std::vector<double> vol);

  std::size_t n_states() const noexcept { return drift_.size(); }
  const Matrix& transition() const noexcept { return transition_; }
  double transition(std::size_t to, std::size_t from) const { return transition_(to, from); }
  std::span<const double> drift() const noexcept { return drift_; }
  std::span<const double> vol() const noexcept { return vol_; }

  bool operator==(const RegimeModel&) const = default;

 private:
  Matrix transition_;
  std::vector<double> drift_;
  std::vector<double> vol_;
};

/// A probability vector over the chain's states.
class StateDistribution {
 public:
  /// Entries must be non-negative and sum to one within 1e-12.
  explicit StateDistribution(std::vector<double> probs);

  /// Rescales a non-negative vector with positive mass onto the simplex.
  static StateDistribution normalized(std::span<const double> weights);
  static StateDistribution uniform(std::size_t n);
  static StateDistribution point_mass(std::size_t n, std::size_t state);

  std::size_t size() const noexcept { return probs_.size(); }
  double operator[](std::size_t i) const { return probs_[i]; }
  std::span<const double> probs() const noexcept { return probs_; }

 private:
  std::vector<double> probs_;
};

/// Finite log-returns y_1..y_T with optional timestamps.
class ReturnSeries {
 public:
  explicit ReturnSeries(std::vector<double> values,
                        std::vector<std::string> timestamps = {});

  std::size_t size() const noexcept { return values_.size(); }
  double operator[](std::size_t k) const { return values_[k]; }
  std::span<const double> values() const noexcept { return values_; }
  const std::vector<std::string>& timestamps() const noexcept { return timestamps_; }

  /// First `n` observations (keeps matching timestamps).
  ReturnSeries prefix(std::size_t n) const;

 private:
  std::vector<double> values_;
  std::vector<std::string> timestamps_;
};

/// Element k of the result is ln(prices[k+1] / prices[k]).
ReturnSeries returns_from_prices(std::span<const double> prices);

/// Fixed point of the transition matrix by power iteration from the uniform
/// vector. Throws ConvergenceError (carrying the L1 residual) when the
/// iteration does not settle, e.g. for periodic chains started off their
/// stationary law.
StateDistribution stationary_distribution(const RegimeModel& model,
                                          std::size_t max_iter = 100000,
                                          double tol = 1e-14);

/// Stationary mean and standard deviation of a single return.
struct MarginalMoments {
  double mean;
  double sd;
};
MarginalMoments marginal_moments(const RegimeModel& model, const StateDistribution& dist);

}  // namespace rhmm
