#pragma once

#include <stdexcept>
#include <string>

namespace fkmoment {

// Domain errors (singular kernel arguments, negative times) use std::domain_error;
// argument validation uses std::invalid_argument. The two below cover the
// remaining failure classes surfaced through the CLI exit codes.

/// A numeric procedure failed: factorization, non-convergence, iteration caps.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// The requested (kernel, initial condition) combination is not supported by
/// a closed-form route. The message names the Monte Carlo alternative.
class CapabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace fkmoment
