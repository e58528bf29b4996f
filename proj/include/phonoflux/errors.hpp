#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace phonoflux {

/// Base class for every error raised by the library.  The CLI maps these to
/// exit code 1; anything else escaping a subcommand is treated as a bug.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidDimension : public Error {
 public:
  using Error::Error;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

/// A near-resonant denominator or a hybridized dressed label made a
/// dispersive quantity meaningless.
class ResonanceError : public Error {
 public:
  using Error::Error;
};

class LookupError : public Error {
 public:
  using Error::Error;
};

class PreconditionViolation : public Error {
 public:
  using Error::Error;
};

class DegenerateNetwork : public Error {
 public:
  using Error::Error;
};

class IntegrationFailure : public Error {
 public:
  using Error::Error;
};

/// Non-fatal diagnostics attached to results.
using Warnings = std::vector<std::string>;

}  // namespace phonoflux
