#pragma once

#include <stdexcept>
#include <string>

namespace a2pm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (CLI exit code 1).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data (CLI exit code 2).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A geometric operation has no valid result inside the image.
class GeometryError : public Error {
 public:
  using Error::Error;
};

}  // namespace a2pm
