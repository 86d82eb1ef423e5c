#pragma once

#include <stdexcept>
#include <string>

namespace fbmint {

/// Domain or precondition violation in a caller-supplied argument.
class ArgumentError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Parameter windows that cannot be satisfied (e.g. an empty kappa window).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Sampling failure: the covariance factorization broke down even after jitter.
class GenerationError : public std::runtime_error {
 public:
  GenerationError(const std::string& what, std::size_t leading_minor)
      : std::runtime_error(what), leading_minor_(leading_minor) {}
  std::size_t leading_minor() const noexcept { return leading_minor_; }

 private:
  std::size_t leading_minor_;
};

/// A norm, derivative or integral exceeded the overflow guard.
class IntegrabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fbmint
