#pragma once

#include <stdexcept>
#include <string>

namespace qmixdsa {

// Error taxonomy mirrored by the CLI exit categories.

// Invalid or inconsistent configuration (bad dimensions, unknown keys,
// out-of-range hyperparameters). Raised before any side effects.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or unreadable external data (trace files, metrics CSVs,
// checkpoints).
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// API misuse: operations called out of order or with stale state.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values detected in numeric state. A data-category failure.
class NumericError : public DataError {
 public:
  using DataError::DataError;
};

}  // namespace qmixdsa
