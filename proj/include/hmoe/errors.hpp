#pragma once

#include <stdexcept>
#include <string>

namespace hmoe {

// Base class for all library errors.
struct Error : std::runtime_error {
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

// Tensor rank/extent mismatch.
struct DimensionError : Error {
  using Error::Error;
};

// Math domain violation (log of a non-positive value, ...).
struct DomainError : Error {
  using Error::Error;
};

// Invalid or inconsistent configuration (unknown key, size mismatch
// between a generated weight vector and its classifier spec, ...).
struct ConfigError : Error {
  using Error::Error;
};

// Malformed or inconsistent data (domain index out of range, ...).
struct DataError : Error {
  using Error::Error;
};

// API contract violation (non-scalar backward root, out-of-range
// schedule argument, mismatched metric vector lengths, ...).
struct ContractError : Error {
  using Error::Error;
};

// Evaluation cannot proceed (non-finite loss, fewer than two clusters
// for a silhouette score, ...).
struct EvalError : Error {
  using Error::Error;
};

// File I/O failure.
struct IoError : Error {
  using Error::Error;
};

}  // namespace hmoe
