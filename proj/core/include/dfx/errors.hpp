#pragma once

#include <stdexcept>
#include <string>

namespace dfx {

/// Base class of every error thrown by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid or inconsistent configuration: bad bounds, missing loss
/// hyperparameter, unknown model or parameter name.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed runtime input: non-finite value, length mismatch,
/// out-of-range coordinate.
class InvalidInputError : public Error {
 public:
  using Error::Error;
};

/// An iterative numeric routine failed to converge.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A single model evaluation failed (simulator crash, timeout, malformed
/// output). The study loop records the trial as failed and continues.
class EvaluationFailed : public Error {
 public:
  using Error::Error;
};

}  // namespace dfx
