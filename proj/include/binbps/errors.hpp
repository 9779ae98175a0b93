#pragma once

#include <stdexcept>
#include <string>

namespace binbps {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IndexError : public Error {
 public:
  using Error::Error;
};

/// Violated operation precondition (bad argument value, particle on a wall, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

class EnumerationInfeasible : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CalibrationError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void check_dim(std::size_t got, std::size_t expected, const char* what) {
  if (got != expected) {
    throw DimensionError(std::string(what) + ": expected length " + std::to_string(expected) +
                         ", got " + std::to_string(got));
  }
}

inline void check_index(std::size_t i, std::size_t dim) {
  if (i >= dim) {
    throw IndexError("coordinate " + std::to_string(i) + " out of range for dimension " +
                     std::to_string(dim));
  }
}

}  // namespace detail
}  // namespace binbps
