#pragma once

#include <stdexcept>
#include <string>

namespace neuroscan {

/// Invalid user input: bad arguments, malformed files, violated preconditions.
/// The CLI maps this to exit code 2.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Shape or congruence mismatch between tensors, images or masks.
class ShapeError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// A gradient or loss became NaN/Inf during optimization.
class NonFiniteError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace neuroscan
