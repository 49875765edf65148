#pragma once

#include <stdexcept>
#include <string>

namespace modfnn {

// Base of every error raised by the library. The CLI maps each subclass to
// an exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Shape or size mismatch between operands.
class DimensionError : public Error {
 public:
  using Error::Error;
};

// Argument outside the domain of an operation (label out of range, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// Value outside its theoretical range; indicates corrupt input.
class RangeError : public Error {
 public:
  using Error::Error;
};

// Inconsistent configuration (k does not divide L, r larger than a batch, ...).
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Unreadable or malformed input files.
class DataError : public Error {
 public:
  using Error::Error;
};

// Training produced a non-finite loss or collapsed below chance accuracy.
class DivergenceError : public Error {
 public:
  DivergenceError(const std::string& what, int epoch, double rate)
      : Error(what), epoch_(epoch), rate_(rate) {}
  int epoch() const noexcept { return epoch_; }
  double rate() const noexcept { return rate_; }

 private:
  int epoch_;
  double rate_;
};

// A model catalog is missing cells that an operation requires.
class PartialModelError : public Error {
 public:
  using Error::Error;
};

}  // namespace modfnn
