#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace desal {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes are incompatible.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// A scalar argument is outside its admissible range (negative sigma, ...).
class ParamError : public Error {
 public:
  using Error::Error;
};

/// Layer specification is not dimension-compatible.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Training produced a non-finite loss, gradient or parameter.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, std::size_t epoch)
      : Error(what + " (epoch " + std::to_string(epoch) + ")"), epoch_(epoch) {}
  std::size_t epoch() const noexcept { return epoch_; }

 private:
  std::size_t epoch_;
};

/// A SAL phase was invoked out of order.
class StateError : public Error {
 public:
  using Error::Error;
};

/// An index (identity id, ...) is out of range.
class RangeError : public Error {
 public:
  using Error::Error;
};

/// A split, table or clustering has no usable content.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

/// Malformed input text; line is 1-based, 0 when not applicable.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : Error(line ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

/// Well-formed input carrying an inadmissible value (label outside {0,1}).
class ValueError : public ParseError {
 public:
  using ParseError::ParseError;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Experiment or model configuration is invalid.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace desal
