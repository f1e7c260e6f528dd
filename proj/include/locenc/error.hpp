#pragma once

#include <stdexcept>
#include <string>

namespace locenc {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Argument outside an operation's domain (bad degree, invalid coordinate, bad config).
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Tensor shapes that do not chain.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf reached a loss or gradient.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// Malformed or truncated file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace locenc
