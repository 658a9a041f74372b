#pragma once

#include <stdexcept>
#include <string>

namespace cplane {

/// Failure categories; the numeric values double as CLI exit codes.
enum class ErrorKind : int {
  kValidation = 2,
  kNumerical = 3,
  kConfiguration = 4,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what) : std::runtime_error(what), kind_(kind) {}

  [[nodiscard]] ErrorKind kind() const noexcept { return kind_; }
  [[nodiscard]] int exit_code() const noexcept { return static_cast<int>(kind_); }

 private:
  ErrorKind kind_;
};

class ValidationError : public Error {
 public:
  explicit ValidationError(const std::string& what) : Error(ErrorKind::kValidation, what) {}
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorKind::kConfiguration, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorKind::kNumerical, what) {}
};

/// Raised when a symmetric system stays indefinite after stabilization.
class SingularSystemError : public NumericalError {
 public:
  SingularSystemError(const std::string& what, double min_eigenvalue)
      : NumericalError(what), min_eigenvalue_(min_eigenvalue) {}

  [[nodiscard]] double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

}  // namespace cplane
