#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace mctm {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Inputs violate a documented precondition (dimensions, labels, config ranges).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A record in a text input could not be parsed.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Non-finite values, non positive-definite matrices, overflow.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A word has zero probability under every topic, so its assignment is undefined.
class DegenerateWordError : public NumericError {
 public:
  using NumericError::NumericError;
};

}  // namespace mctm
