#pragma once

#include <stdexcept>
#include <string>

namespace neuralot {

// Raised when a caller violates a documented precondition (empty batch,
// mismatched dimensions, out-of-range parameter).
class PreconditionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// Raised when a computation produces NaN/Inf or otherwise fails to yield a
// usable number.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw PreconditionError(msg);
}

}  // namespace neuralot
