#pragma once

#include <stdexcept>
#include <string>

namespace belldiag {

/// Operator or register sizes that do not fit together.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed input: probabilities out of range, bad files, bad flags.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A post-selected measurement branch with (numerically) zero weight.
class ZeroProbabilityError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// An iterative search ran out of budget before meeting its tolerance.
class ConvergenceError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace belldiag
