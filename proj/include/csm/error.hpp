#pragma once

#include <stdexcept>
#include <string>

namespace csm {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A state is outside its space, or a structure references one.
class InvalidState : public Error {
 public:
  using Error::Error;
};

/// An operation needed to enumerate a space larger than the configured cap.
class EnumerationLimit : public Error {
 public:
  using Error::Error;
};

/// The neighborhood-induced graph is not weakly connected on the support.
class Disconnected : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, zero probabilities, or scores at or below -1.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Malformed input files or configuration.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace csm
