#pragma once

#include <stdexcept>
#include <string>

namespace cdcl {

// Base of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad arguments or contract violations by the caller.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

// Malformed, inconsistent or insufficient input data.
class DataError : public Error {
 public:
  using Error::Error;
};

// Header/raw payload problems while reading files.
class LoadError : public DataError {
 public:
  using DataError::DataError;
};

// Solver or factorization failures.
class NumericalError : public Error {
 public:
  using Error::Error;
};

namespace detail {

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw InvalidArgument(msg);
}

}  // namespace detail

}  // namespace cdcl
