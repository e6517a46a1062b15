#pragma once

#include <stdexcept>
#include <string>

namespace direcnet {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Extents or ranks that do not line up.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameter / option combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Non-finite or out-of-domain numeric input.
class ValueError : public Error {
 public:
  using Error::Error;
};

// Operation invoked in a state that does not support it (uninitialized
// running statistics, missing gradients, ...).
class StateError : public Error {
 public:
  using Error::Error;
};

// Caller broke a documented precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Malformed file content (manifest, checkpoint, rows file).
class FormatError : public Error {
 public:
  using Error::Error;
};

}  // namespace direcnet
