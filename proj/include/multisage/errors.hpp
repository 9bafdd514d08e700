#pragma once

#include <stdexcept>
#include <string>

namespace multisage {

// Error categories map onto distinct CLI exit codes.

/// Malformed or inconsistent input data (edge lists, couplings, split files).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid run configuration or schema violation.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Non-finite values during training or evaluation.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace multisage
