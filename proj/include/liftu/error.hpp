#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace liftu {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Malformed or inconsistent user input. The CLI maps these to exit code 2.
class InputError : public Error {
 public:
  using Error::Error;
};

class ModelError : public InputError {
 public:
  using InputError::InputError;
};

class DomainError : public InputError {
 public:
  using InputError::InputError;
};

class QueryError : public InputError {
 public:
  using InputError::InputError;
};

// A queried or observed atom has no grounding in the model.
class MissingAtomError : public QueryError {
 public:
  using QueryError::QueryError;
};

class ProgramError : public InputError {
 public:
  ProgramError(const std::string& what, std::size_t line, std::size_t column)
      : InputError(std::to_string(line) + ":" + std::to_string(column) + ": " + what),
        line_(line),
        column_(column) {}
  explicit ProgramError(const std::string& what) : InputError(what) {}

  std::size_t line() const { return line_; }
  std::size_t column() const { return column_; }

 private:
  std::size_t line_ = 0;
  std::size_t column_ = 0;
};

// Failure while answering a query on a well-formed model (exit code 3).
class InferenceError : public Error {
 public:
  using Error::Error;
};

// A lifted operation's precondition does not hold. Callers fall back to
// grounding the affected parfactors.
class LiftingError : public InferenceError {
 public:
  using InferenceError::InferenceError;
};

}  // namespace liftu
