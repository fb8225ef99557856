#pragma once

#include <stdexcept>
#include <string>

namespace levyql {

// Failure modes that calling code is expected to distinguish.  Everything
// derives from Error so a CLI can catch one type and exit nonzero.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// V(x, beta) could not be factorized; the model violates the positive
// definiteness requirement on b b^T + c c^T.
class NonPositiveDefiniteError : public Error {
 public:
  using Error::Error;
};

class InvalidDurationError : public Error {
 public:
  using Error::Error;
};

// Observation grid is not an integer decimation of the fine simulation grid.
class GridMismatchError : public Error {
 public:
  using Error::Error;
};

// Driver has no closed-form jump moments; caller must estimate empirically.
class MomentsUnavailableError : public Error {
 public:
  using Error::Error;
};

// A state became non-finite during simulation (explosion diagnostic).
class NonFiniteError : public Error {
 public:
  using Error::Error;
};

// Shifted parameter left the parameter box when evaluating the random field.
class DomainExceededError : public Error {
 public:
  using Error::Error;
};

class AllStartsFailedError : public Error {
 public:
  using Error::Error;
};

// An information block is numerically singular (condition number > 1e12).
class SingularInformationError : public Error {
 public:
  using Error::Error;
};

class UnsupportedError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace levyql
