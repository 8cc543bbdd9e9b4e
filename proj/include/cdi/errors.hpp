#pragma once

#include <stdexcept>
#include <string>

namespace cdi {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation (n < 2, x <= 0, beta <= 1, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// A rate model that violates its own invariants (non-positive rate, non-decreasing tail rule).
class InvalidModelError : public Error {
 public:
  using Error::Error;
};

/// Raised when a numeric procedure could not meet its tolerance within its configured limits.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Tail sum could not be certified below the index horizon.
class NonConvergenceError : public NumericError {
 public:
  NonConvergenceError(const std::string& what, long long horizon)
      : NumericError(what + " (horizon " + std::to_string(horizon) + ")"), horizon_(horizon) {}
  long long horizon() const noexcept { return horizon_; }

 private:
  long long horizon_;
};

/// speed() would exceed the maximum index.
class IndexOverflowError : public NumericError {
 public:
  IndexOverflowError(const std::string& what, long long bound)
      : NumericError(what + " (bound " + std::to_string(bound) + ")"), bound_(bound) {}
  long long bound() const noexcept { return bound_; }

 private:
  long long bound_;
};

/// No admissible truncation level for a sampler.
class TruncationError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Moment generating function or tilted rates undefined at the requested argument.
class TiltDomainError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// Quadrature did not reach its tolerance; carries the best estimate.
class QuadratureError : public NumericError {
 public:
  QuadratureError(const std::string& what, double estimate, double error)
      : NumericError(what), estimate_(estimate), error_(error) {}
  double estimate() const noexcept { return estimate_; }
  double error() const noexcept { return error_; }

 private:
  double estimate_;
  double error_;
};

/// Partial-fraction evaluation refused because it would be ill-conditioned.
class IllConditionedError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace cdi
