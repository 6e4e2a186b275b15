#pragma once

#include <stdexcept>
#include <string>

namespace otm {

// Invalid arguments are reported with std::invalid_argument. The types below
// cover the remaining failure classes, each mapped to its own CLI exit code.

/// A configuration is well-formed but inconsistent (e.g. PLT with a Direct model).
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input data is missing, unreadable, or malformed.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Training produced a non-finite gradient or loss.
class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace otm
