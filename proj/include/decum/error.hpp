#pragma once

#include <stdexcept>
#include <string>

namespace decum {

// Error categories map onto distinct CLI exit codes.
enum class ErrorKind { Config = 2, Data = 3, Numeric = 4, Io = 5 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

// Malformed or insufficient input data (CSV parse failures, short histories, singular fits).
struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

// Non-finite values, domain violations and constraint breaches inside the model.
struct NumericError : Error {
  explicit NumericError(const std::string& what) : Error(ErrorKind::Numeric, what) {}
};

struct IoError : Error {
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

struct RangeError : DataError {
  explicit RangeError(const std::string& what) : DataError(what) {}
};

struct CapacityError : ConfigError {
  explicit CapacityError(const std::string& what) : ConfigError(what) {}
};

struct ConstraintError : NumericError {
  explicit ConstraintError(const std::string& what) : NumericError(what) {}
};

}  // namespace decum
