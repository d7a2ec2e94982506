#pragma once

#include <stdexcept>
#include <string>

namespace lowrank {

// Base class for every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite or malformed input data.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

// A scalar parameter outside its admissible range (e.g. epsilon <= 0).
class InvalidParameter : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefinite : public Error {
 public:
  using Error::Error;
};

// Structural problem in an SDP model (bad block index, missing objective...).
class ModelError : public Error {
 public:
  using Error::Error;
};

class CompileError : public Error {
 public:
  using Error::Error;
};

// The dual point is too far from feasibility to yield a certified bound.
class BoundUnavailable : public Error {
 public:
  using Error::Error;
};

// Text input that does not follow the documented file grammar.
class ParseError : public Error {
 public:
  ParseError(const std::string& what, int line)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

}  // namespace lowrank
