#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace caco {

// Root of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// A vector whose norm is too small to define a direction.
class DegenerateVectorError : public Error {
 public:
  using Error::Error;
};

// Invalid hyperparameters, shapes, or options.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Inputs that disagree with each other (indices, shapes, traces).
class ConsistencyError : public Error {
 public:
  using Error::Error;
};

// Non-finite values reached an update.
class NumericalFault : public Error {
 public:
  using Error::Error;
};

// Operation not available in the bank's current mode.
class ModeError : public Error {
 public:
  using Error::Error;
};

class GenerationError : public Error {
 public:
  using Error::Error;
};

// Text input that could not be parsed; carries the 1-based line number.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

// Checkpoint file with the wrong magic, an unknown version, or truncated.
class CheckpointError : public Error {
 public:
  using Error::Error;
};

}  // namespace caco
