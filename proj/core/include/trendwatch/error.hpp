#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace trendwatch {

/// Broad failure category. The CLI maps these onto exit codes.
enum class ErrorKind { usage, data, numeric, transport };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, std::string code, const std::string& message)
      : std::runtime_error(message), kind_(kind), code_(std::move(code)) {}

  ErrorKind kind() const noexcept { return kind_; }
  /// Short machine-readable tag such as "schema" or "gap".
  const std::string& code() const noexcept { return code_; }

 private:
  ErrorKind kind_;
  std::string code_;
};

class UsageError : public Error {
 public:
  explicit UsageError(const std::string& message)
      : Error(ErrorKind::usage, "usage", message) {}
};

class SchemaError : public Error {
 public:
  explicit SchemaError(const std::string& message)
      : Error(ErrorKind::data, "schema", message) {}
};

class DuplicateError : public Error {
 public:
  DuplicateError(const std::string& message, std::vector<std::string> offenders)
      : Error(ErrorKind::data, "duplicate", message), offenders_(std::move(offenders)) {}

  const std::vector<std::string>& offenders() const noexcept { return offenders_; }

 private:
  std::vector<std::string> offenders_;
};

class DataError : public Error {
 public:
  DataError(std::string code, const std::string& message)
      : Error(ErrorKind::data, std::move(code), message) {}
};

/// Window construction failures: not enough trailing history.
class InsufficientHistoryError : public DataError {
 public:
  explicit InsufficientHistoryError(const std::string& message)
      : DataError("insufficient_history", message) {}
};

/// Window construction failures: a gap longer than the policy allows.
class GapError : public DataError {
 public:
  explicit GapError(const std::string& message) : DataError("gap", message) {}
};

class NumericError : public Error {
 public:
  NumericError(std::string code, const std::string& message)
      : Error(ErrorKind::numeric, std::move(code), message) {}
};

class TransportError : public Error {
 public:
  TransportError(const std::string& message, int status)
      : Error(ErrorKind::transport, "transport", message), status_(status) {}

  /// Last HTTP status seen, or -1 when no response arrived.
  int status() const noexcept { return status_; }

 private:
  int status_;
};

}  // namespace trendwatch
