#pragma once

#include <stdexcept>
#include <string>

namespace mpet {

/// Base class for all errors raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid user input: geometry, parameters, configuration files.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Numerical failure: factorization breakdown, non-convergence that aborts a run.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace mpet
