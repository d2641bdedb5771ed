#pragma once

#include <stdexcept>
#include <string>

namespace fpcav {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad command line, unknown config key, malformed request. Process exit code 1.
class UsageError : public Error {
 public:
  using Error::Error;
};

/// Invalid or inconsistent input data (files, traces, stack definitions). Exit code 2.
class DataError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: degenerate matrix products, unidentifiable fits. Exit code 3.
class NumericalError : public Error {
 public:
  using Error::Error;
};

}  // namespace fpcav
