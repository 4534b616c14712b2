#ifndef MREST_ERROR_HPP
#define MREST_ERROR_HPP

#include <stdexcept>
#include <string>

namespace mrest {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

/// Malformed input: CSV cells, JSON configuration, estimator names.
class ParseError : public Error {
 public:
  using Error::Error;
};

/// A precondition on arguments was violated (index out of range, shape mismatch).
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// A numerical routine could not produce a usable answer.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A barrier point left the feasible region {rho : 1 + rho'g_i > 0}.
class DomainViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace mrest

#endif  // MREST_ERROR_HPP
