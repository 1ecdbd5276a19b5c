#pragma once

#include <stdexcept>
#include <string>

namespace iqscc {

// Every error the library raises derives from Error so callers can catch one type.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain of a function (e.g. Q^{-1}(0)).
class DomainError : public Error {
 public:
  using Error::Error;
};

class OverflowError : public Error {
 public:
  using Error::Error;
};

class NotPositiveDefiniteError : public Error {
 public:
  using Error::Error;
};

// Invalid configuration or scenario; message names the offending field.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// The radar SINR threshold cannot be met from the current point.
class InfeasibleError : public Error {
 public:
  using Error::Error;
};

// Interior-point solver did not reach its tolerance.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace iqscc
