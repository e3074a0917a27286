#pragma once

#include <stdexcept>
#include <string>

namespace optochain {

/// Input outside the domain of a model primitive (coincident ions, bad units).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// An iterative solver ran out of budget; carries the last residual.
class ConvergenceError : public std::runtime_error {
 public:
  ConvergenceError(const std::string& what, double residual)
      : std::runtime_error(what), residual_(residual) {}
  double residual() const { return residual_; }

 private:
  double residual_;
};

/// A Hessian or drift matrix signals an unstable equilibrium / no steady state.
class InstabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The eigenbasis route hit a near-singular denominator or basis.
class ConditioningError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A covariance matrix violates the uncertainty relation.
class PhysicalityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid scenario configuration (CLI exit code 2).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace optochain
