#ifndef MUSKAT_ERRORS_HPP
#define MUSKAT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace muskat {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Rejected grid, parameter set, or scenario configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Input outside an operation's domain (negative density, bad mass, s outside [0,1]).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Fields defined on different grids.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Linear solve failure in the finite-difference reference solver.
class SolverError : public Error {
 public:
  using Error::Error;
};

}  // namespace muskat

#endif  // MUSKAT_ERRORS_HPP
