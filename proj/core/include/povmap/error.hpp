#pragma once

#include <stdexcept>
#include <string>

namespace povmap {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad invocation: missing manifest keys, unknown flags, out-of-range options.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Malformed or inconsistent input data.
class DataError : public Error {
 public:
  using Error::Error;
};

/// The leakage audit found a train/test contamination.
class LeakageError : public Error {
 public:
  using Error::Error;
};

}  // namespace povmap
