#pragma once

#include <stdexcept>
#include <string>

namespace cord {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// NaN/Inf in a forward value, gradient or loss. Maps to exit code 2.
class NumericError : public Error {
 public:
  using Error::Error;
};

// File could not be opened, read or written. Maps to exit code 3.
class IoError : public Error {
 public:
  IoError(const std::string& what, const std::string& path)
      : Error(what + ": " + path), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Invalid configuration, argument or precondition violation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

}  // namespace cord
