#pragma once

#include <stdexcept>
#include <string>

namespace smuce {

/// Argument outside the natural parameter space or mean domain of a family.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// mean_inverse was asked for a point on the boundary of the mean domain
/// (e.g. a Poisson mean of 0); callers fall back to the one-sided treatment.
class BoundaryError : public DomainError {
 public:
  using DomainError::DomainError;
};

/// The multiscale constraint cannot be met by any step function.
class InfeasibleError : public std::runtime_error {
 public:
  InfeasibleError(const std::string& what, double min_attainable)
      : std::runtime_error(what), min_attainable_(min_attainable) {}

  /// Smallest value of the statistic any step function can reach on the data.
  double min_attainable() const noexcept { return min_attainable_; }

 private:
  double min_attainable_;
};

class IoError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Requested work exceeds the configured compute budget.
class ResourceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace smuce
