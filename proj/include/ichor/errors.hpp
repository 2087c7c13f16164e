// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <stdexcept>
#include <string>

namespace ichor {

/// Error categories, mapped 1:1 onto CLI exit codes.
enum class ErrorKind : int {
  config = 2,
  data = 3,
  numeric = 4,
  internal = 5,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& msg)
      : std::runtime_error(msg), kind_(kind) {}
  ErrorKind kind() const { return kind_; }
  int exit_code() const { return static_cast<int>(kind_) > 4 ? 1 : static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& msg) : Error(ErrorKind::config, msg) {}
};

class DataError : public Error {
 public:
  explicit DataError(const std::string& msg) : Error(ErrorKind::data, msg) {}
};

class NumericError : public Error {
 public:
  explicit NumericError(const std::string& msg) : Error(ErrorKind::numeric, msg) {}
};

class InternalError : public Error {
 public:
  explicit InternalError(const std::string& msg) : Error(ErrorKind::internal, msg) {}
};

// Format-level failures, each its own type so callers can tell them apart.
class BadMagicError : public DataError {
 public:
  explicit BadMagicError(const std::string& msg) : DataError(msg) {}
};

class UnsupportedDatatypeError : public DataError {
 public:
  explicit UnsupportedDatatypeError(const std::string& msg) : DataError(msg) {}
};

class DimError : public DataError {
 public:
  explicit DimError(const std::string& msg) : DataError(msg) {}
};

class NonFiniteDataError : public DataError {
 public:
  explicit NonFiniteDataError(const std::string& msg) : DataError(msg) {}
};

class PayloadLengthError : public DataError {
 public:
  explicit PayloadLengthError(const std::string& msg) : DataError(msg) {}
};

class HeaderError : public DataError {
 public:
  explicit HeaderError(const std::string& msg) : DataError(msg) {}
};

class UnitError : public DataError {
 public:
  explicit UnitError(const std::string& msg) : DataError(msg) {}
};

class EmptyForegroundError : public DataError {
 public:
  explicit EmptyForegroundError(const std::string& msg) : DataError(msg) {}
};

class ShapeError : public DataError {
 public:
  explicit ShapeError(const std::string& msg) : DataError(msg) {}
};

class StratificationError : public DataError {
 public:
  explicit StratificationError(const std::string& msg) : DataError(msg) {}
};

class UndefinedLossError : public NumericError {
 public:
  explicit UndefinedLossError(const std::string& msg) : NumericError(msg) {}
};

class UndefinedMetricError : public NumericError {
 public:
  explicit UndefinedMetricError(const std::string& msg) : NumericError(msg) {}
};

}  // namespace ichor
