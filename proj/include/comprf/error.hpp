#pragma once

#include <stdexcept>
#include <string>

namespace comprf {

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid parameters or configuration (bad flag, out-of-range constant).
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Malformed or incompatible input data (parse failures, fingerprint mismatch).
class DataError : public Error {
 public:
  using Error::Error;
};

/// A forest trained for one task was asked to serve the other.
class TaskMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace comprf
