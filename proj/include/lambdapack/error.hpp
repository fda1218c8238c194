#pragma once

#include <stdexcept>
#include <string>

namespace lambdapack {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(int line, int column, const std::string& message)
      : Error("line " + std::to_string(line) + ", column " + std::to_string(column) + ": " +
              message),
        line_(line),
        column_(column) {}

  int line() const noexcept { return line_; }
  int column() const noexcept { return column_; }

 private:
  int line_;
  int column_;
};

class EvalError : public Error {
 public:
  using Error::Error;
};

/// A tile written by more than one node, or rewritten with different bytes.
class SsaViolation : public Error {
 public:
  using Error::Error;
};

class StoreError : public Error {
 public:
  using Error::Error;
};

class MissingKeyError : public StoreError {
 public:
  using StoreError::StoreError;
};

class NumericalError : public Error {
 public:
  NumericalError(const std::string& message, long pivot = -1)
      : Error(message), pivot_(pivot) {}

  /// Index of the failing pivot, or -1 when not applicable.
  long pivot() const noexcept { return pivot_; }

 private:
  long pivot_;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class QueueError : public Error {
 public:
  using Error::Error;
};

class StaleReceiptError : public QueueError {
 public:
  using QueueError::QueueError;
};

}  // namespace lambdapack
