#pragma once

#include <stdexcept>
#include <string>

namespace isolab {

// Precondition or shape violation; indicates a caller bug.
struct ContractViolation : std::logic_error {
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Input that is statistically meaningless (too few rows, zero spectrum, ...).
struct DegenerateInput : std::runtime_error {
  explicit DegenerateInput(const std::string& what) : std::runtime_error(what) {}
};

// A numeric evaluation produced a non-finite value.
struct EvaluationError : std::runtime_error {
  explicit EvaluationError(const std::string& what) : std::runtime_error(what) {}
};

// Invalid run configuration: unknown domain, bad weights, missing file, ...
struct ConfigError : std::runtime_error {
  explicit ConfigError(const std::string& what) : std::runtime_error(what) {}
};

struct IoError : std::runtime_error {
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// Checkpoint loading failures, split by cause so callers can tell a wrong
// file apart from a damaged one.
struct CheckpointError : IoError {
  enum class Kind { BadMagic, BadVersion, Truncated, Corrupt };
  Kind kind;
  CheckpointError(Kind k, const std::string& what) : IoError(what), kind(k) {}
};

}  // namespace isolab
