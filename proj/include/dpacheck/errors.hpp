#pragma once

#include <stdexcept>
#include <string>

namespace dpacheck {

// Failures are reported through this small hierarchy. The CLI maps them onto
// exit codes: DataError and its children -> 2, ServiceError -> 3.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad input data, such as a malformed file or a missing embedding.
class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public DataError {
 public:
  ParseError(const std::string& source, std::size_t line,
             const std::string& what)
      : DataError(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}
  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ValidationError : public DataError {
 public:
  using DataError::DataError;
};

// A resource lacks an optional section an operation depends on.
class CapabilityError : public DataError {
 public:
  using DataError::DataError;
};

class NotFoundError : public DataError {
 public:
  using DataError::DataError;
};

// Training produced a non-finite loss.
class DivergenceError : public DataError {
 public:
  DivergenceError(int epoch, double loss)
      : DataError("training diverged at epoch " + std::to_string(epoch) +
                  " (loss=" + std::to_string(loss) + ")"),
        epoch_(epoch) {}
  int epoch() const { return epoch_; }

 private:
  int epoch_;
};

// Remote provider / MT client failures. Retryable at the caller's discretion.
class ServiceError : public Error {
 public:
  using Error::Error;
};

}  // namespace dpacheck
