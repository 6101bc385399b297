#pragma once

#include <stdexcept>
#include <string>

namespace reflect {

/// Malformed input: wrong dimension, out-of-range parameter, mismatched grids.
class InvalidArgument : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Valid input for which a formula has no meaning (e.g. ln(K^d/gamma) < 0).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

class UnsupportedConfiguration : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A linear solve or factorization could not be carried out reliably.
class NumericalFailure : public std::runtime_error {
 public:
  NumericalFailure(const std::string& what, double condition_estimate)
      : std::runtime_error(what), condition_(condition_estimate) {}
  double condition_estimate() const noexcept { return condition_; }

 private:
  double condition_;
};

/// A structural relation required by the transfer construction does not hold.
class PreconditionViolation : public std::runtime_error {
 public:
  PreconditionViolation(const std::string& relation, const std::string& what)
      : std::runtime_error(what), relation_(relation) {}
  const std::string& relation() const noexcept { return relation_; }

 private:
  std::string relation_;
};

}  // namespace reflect
