#pragma once

#include <stdexcept>
#include <string>

namespace ega {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed input: bad shapes, out-of-range parameters, unreadable files.
class InputError : public Error {
 public:
  using Error::Error;
};

/// The data are well formed but cannot support the requested estimate
/// (constant columns, empty margins, non-positive-definite matrices).
class DataError : public Error {
 public:
  using Error::Error;
};

/// An iterative solver stopped before meeting its tolerance.
class ConvergenceError : public Error {
 public:
  using Error::Error;
};

}  // namespace ega
