#pragma once

#include <stdexcept>
#include <string>

namespace latte {

/// Malformed input: bad dataset files, shape mismatches, contract violations.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values or failed numerical checks.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace latte
