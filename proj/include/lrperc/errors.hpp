#pragma once

#include <stdexcept>
#include <string>

namespace lrperc {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionMismatch : public Error {
 public:
  using Error::Error;
};

/// Fewer qualifying displacements than requested exist below the scan bound.
class InsufficientSupport : public Error {
 public:
  using Error::Error;
};

class NoInfiniteProjection : public Error {
 public:
  using Error::Error;
};

class FrontierOverflow : public Error {
 public:
  using Error::Error;
};

/// Coarse vertex (i, j) with odd i + j.
class ParityViolation : public Error {
 public:
  using Error::Error;
};

/// Query outside a finite sampling window or time range.
class OutOfWindow : public Error {
 public:
  using Error::Error;
};

/// A materialized object would exceed its configured memory cap.
class CapacityExceeded : public Error {
 public:
  using Error::Error;
};

class InvalidArgument : public Error {
 public:
  using Error::Error;
};

}  // namespace lrperc
