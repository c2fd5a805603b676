#pragma once

#include <stdexcept>
#include <string>

namespace elmsim {

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad flags, unknown config keys, invalid parameter combinations.
class UsageError : public Error {
 public:
  using Error::Error;
};

enum class DataErrorKind {
  kMissingManifest,
  kMissingEventFile,
  kMalformedRow,
  kNegativeTimestamp,
  kUnsortedTimestamps,
  kChannelOutOfRange,
  kLabelOutOfRange,
  kOnsetOutOfRange,
  kIo,
};

const char* to_string(DataErrorKind kind);

/// Validation failure on input data. Carries the offending file and the
/// 1-based line number (0 when the error is not tied to a line).
class DataError : public Error {
 public:
  DataError(DataErrorKind kind, std::string file, int line, const std::string& what);

  DataErrorKind kind() const { return kind_; }
  const std::string& file() const { return file_; }
  int line() const { return line_; }

 private:
  DataErrorKind kind_;
  std::string file_;
  int line_;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Raised by operations whose result is undefined on all-zero inputs.
class DegenerateInputError : public NumericalError {
 public:
  using NumericalError::NumericalError;
};

}  // namespace elmsim
