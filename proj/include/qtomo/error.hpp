#pragma once

#include <stdexcept>
#include <string>

namespace qtomo {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// A matrix that should be a state has an eigenvalue below the clamping
/// threshold. `most_negative()` is that eigenvalue.
class PositivityViolation : public Error {
 public:
  PositivityViolation(const std::string& what, double most_negative)
      : Error(what), most_negative_(most_negative) {}
  double most_negative() const noexcept { return most_negative_; }

 private:
  double most_negative_;
};

/// The protocol cannot resolve the requested state family.
class IncompleteProtocol : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// A run configuration failed validation.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// An iterative computation stopped without meeting its acceptance threshold.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

}  // namespace qtomo
