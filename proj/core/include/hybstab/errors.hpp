#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace hybstab {

/// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Expression text could not be parsed. Carries the byte offset of the problem.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t offset)
      : Error(what + " (at byte " + std::to_string(offset) + ")"), offset_(offset) {}
  std::size_t offset() const { return offset_; }

 private:
  std::size_t offset_;
};

/// Evaluation failures: unbound variables, arity problems.
class EvalError : public Error {
 public:
  using Error::Error;
};

/// Argument outside the domain of a function (ln of nonpositive, sqrt of
/// negative, division by zero, fractional power of a negative base).
class DomainError : public EvalError {
 public:
  using EvalError::EvalError;
};

/// An AST grew past the configured node budget.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// Config or spec document violates its schema.
class SchemaError : public Error {
 public:
  using Error::Error;
};

/// A numerical routine failed to produce a result (non-convergence,
/// escaped integration, invalid bracket, ...).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// The orbit failed to return to the section.
class NoReturnError : public NumericError {
 public:
  using NumericError::NumericError;
};

/// A polycycle spec violates one of the hyperbolicity conditions.
class NotHyperbolicError : public Error {
 public:
  using Error::Error;
};

}  // namespace hybstab
