#pragma once

#include <stdexcept>
#include <string>

namespace srosr {

// Failure categories double as CLI exit codes.
enum class ErrorKind { Config = 2, Data = 3, Numerical = 4 };

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }
  int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

struct ConfigError : Error {
  explicit ConfigError(const std::string& what) : Error(ErrorKind::Config, what) {}
};

struct DataError : Error {
  explicit DataError(const std::string& what) : Error(ErrorKind::Data, what) {}
};

struct NumericalError : Error {
  explicit NumericalError(const std::string& what) : Error(ErrorKind::Numerical, what) {}
};

}  // namespace srosr
