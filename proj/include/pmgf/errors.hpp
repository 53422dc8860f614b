#pragma once

#include <stdexcept>
#include <string>

namespace pmgf {

// Bad input: shapes, ranges, malformed files. Maps to CLI exit code 1.
class ValidationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Numerical breakdown during a computation (NaN loss, degenerate statistics).
// Maps to CLI exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw ValidationError(message);
}

}  // namespace pmgf
