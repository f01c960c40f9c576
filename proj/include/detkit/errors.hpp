#pragma once

#include <stdexcept>

namespace detkit {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Shapes or lengths of inputs do not agree.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A numeric argument lies outside the domain of the operation.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input files (JSON, binary feature maps).
class InputError : public Error {
 public:
  using Error::Error;
};

}  // namespace detkit
