#pragma once

#include <stdexcept>
#include <string>

namespace ptomo {

/// Bad input: inconsistent shapes, invalid configuration, malformed files.
/// The CLI maps this to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Failure while computing: non-finite losses, I/O errors during a run.
/// The CLI maps this to exit code 2.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ValidationError(msg);
}

}  // namespace ptomo
