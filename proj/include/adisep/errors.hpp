#pragma once

#include <stdexcept>
#include <string>

namespace adisep {

/// Tensor or map dimensions do not agree with what an operation requires.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A scalar parameter is outside its admissible range.
class ParameterError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed text input. The message names the offending line.
class ParseError : public std::runtime_error {
 public:
  ParseError(int line, const std::string& what)
      : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line) {}
  int line() const noexcept { return line_; }

 private:
  int line_;
};

/// Binary payload (PNG) in an unsupported or corrupt encoding.
class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated a documented precondition (e.g. result label without score).
class ContractError : public std::logic_error {
 public:
  using std::logic_error::logic_error;
};

/// A metric is undefined for the given data (e.g. AP with no valid ground truth).
class EvaluationError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace adisep
