#pragma once

#include <stdexcept>
#include <string>

namespace panerf {

/// Base of every error raised by the library. The category decides the CLI
/// exit code (usage/config = 1, data = 2, numeric = 3).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid argument in the mathematical sense (pixel out of bounds, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Invalid configuration value or combination.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Caller violated a precondition (shape mismatch, missing state, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf encountered during computation.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Missing or inconsistent input data on disk.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Malformed file contents. Carries the byte offset where parsing failed.
class ParseError : public DataError {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : DataError(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}

  std::size_t offset() const noexcept { return offset_; }

 private:
  std::size_t offset_;
};

}  // namespace panerf
