#pragma once

#include <stdexcept>
#include <string>

namespace bandfit {

// Root of every error the library throws. Callers that only need to know
// "something in bandfit failed" catch this.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// An argument lies outside the domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration (schedule sizes, band layout, session config).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Newton iteration did not reach the stationarity tolerance.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : Error(what), residual_(residual) {}
  double residual() const noexcept { return residual_; }

 private:
  double residual_;
};

// Factorization or other linear-algebra failure.
class NumericalError : public Error {
 public:
  using Error::Error;
};

// Every objective evaluation during hyperparameter search failed.
class OptimizationError : public Error {
 public:
  using Error::Error;
};

// Feedback arrived for a presentation that is not the current one.
class OrderingError : public Error {
 public:
  using Error::Error;
};

// Operation is not valid in the current session state.
class StateError : public Error {
 public:
  using Error::Error;
};

// All pairs of the schedule have been presented.
class SessionComplete : public StateError {
 public:
  using StateError::StateError;
};

// Malformed or unsupported file content.
class FormatError : public Error {
 public:
  using Error::Error;
};

// FIR design missed its accuracy target.
class DesignError : public Error {
 public:
  DesignError(const std::string& what, double worst_deviation_db)
      : Error(what), worst_deviation_db_(worst_deviation_db) {}
  double worst_deviation_db() const noexcept { return worst_deviation_db_; }

 private:
  double worst_deviation_db_;
};

// Full enumeration would exceed the configured pair budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

}  // namespace bandfit
