#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace saga {

/// Input that violates a documented contract (bad config, bad shapes, bad
/// arguments). The CLI maps these to exit code 1.
class ValidationError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

class ParseError : public ValidationError {
 public:
  ParseError(const std::string& what, std::size_t line)
      : ValidationError("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class EmptyInputError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

class InsufficientDataError : public ValidationError {
 public:
  using ValidationError::ValidationError;
};

/// Runtime numerical failure (divergence, non-finite values, singular
/// matrices). The CLI maps these to exit code 2.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class NoPeriodError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace saga
