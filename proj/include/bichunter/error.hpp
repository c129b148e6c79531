#pragma once

#include <stdexcept>
#include <string>

namespace bichunter {

/// Base for every error raised by the library. `kind()` is a short
/// machine-readable tag the CLI prints ahead of the message.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

/// Malformed or inconsistent input data (files, records, cross references).
class DataError : public Error {
 public:
  explicit DataError(const std::string& message) : Error("data", message) {}
};

/// Invalid configuration or call arguments.
class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& message) : Error("config", message) {}
};

/// Shape mismatch between matrices, models and caches.
class ShapeError : public Error {
 public:
  explicit ShapeError(const std::string& message) : Error("shape", message) {}
};

/// Numerical failure: non-finite losses, gradients or features.
class NumericError : public Error {
 public:
  explicit NumericError(const std::string& message) : Error("numeric", message) {}
};

}  // namespace bichunter
