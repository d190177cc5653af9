#pragma once

#include <stdexcept>
#include <string>

namespace strata {

/// Input outside the mathematical domain of an operation (bad probability, bad label).
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

/// Invalid configuration: malformed boundaries, non-monotone thresholds,
/// dimension mismatches, non-positive penalties.
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed external data (CSV/JSON contents).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Numerically degenerate result (infinite constants, non-finite iterates).
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace strata
