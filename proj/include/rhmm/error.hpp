#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace rhmm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A precondition on an argument was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// An iterative routine did not converge; carries the last residual.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

/// Root bracketing failed; carries the bracket and the function values there.
class BracketError : public Error {
 public:
  BracketError(const std::string& what, double lo, double hi, double f_lo,
               double f_hi)
      : Error(what), lo_(lo), hi_(hi), f_lo_(f_lo), f_hi_(f_hi) {}
  double lo() const noexcept { return lo_; }
  double hi() const noexcept { return hi_; }
  double f_lo() const noexcept { return f_lo_; }
  double f_hi() const noexcept { return f_hi_; }

 private:
  double lo_, hi_, f_lo_, f_hi_;
};

/// The filter recursion produced a non-finite value or a vanishing
/// normalizer. This is the observable failure of the classical algorithm
/// under gross outliers, so it carries where it happened.
class BreakdownError : public Error {
 public:
  BreakdownError(const std::string& what, std::size_t step, double y,
                 std::string quantity)
      : Error(what), step_(step), y_(y), quantity_(std::move(quantity)) {}
  std::size_t step() const noexcept { return step_; }
  double y() const noexcept { return y_; }
  const std::string& quantity() const noexcept { return quantity_; }

 private:
  std::size_t step_;
  double y_;
  std::string quantity_;
};

/// Malformed input file; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace rhmm
