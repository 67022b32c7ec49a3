#pragma once

#include <stdexcept>
#include <string>

namespace sprune {

/// Shape or geometry of an operand does not admit the requested operation.
struct DimensionError : std::runtime_error {
  explicit DimensionError(const std::string& what) : std::runtime_error(what) {}
};

/// A data file is malformed (bad magic, truncation, inconsistent counts).
struct FormatError : std::runtime_error {
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

/// API called outside its contract (bad argument, missing precondition).
struct UsageError : std::runtime_error {
  explicit UsageError(const std::string& what) : std::runtime_error(what) {}
};

/// Non-finite values where finite ones are required (diverged training, NaN grads).
struct NumericError : std::runtime_error {
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Serialized state does not match the live model (shape/version/checksum).
struct IntegrityError : std::runtime_error {
  explicit IntegrityError(const std::string& what) : std::runtime_error(what) {}
};

/// A pruning policy cannot make a legal decision.
struct PolicyError : std::runtime_error {
  explicit PolicyError(const std::string& what) : std::runtime_error(what) {}
};

/// Experiment configuration is invalid.
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace sprune
