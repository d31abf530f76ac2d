#pragma once

#include <stdexcept>
#include <string>

namespace ridekit {

/// Base class for every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A documented precondition on an input was violated (negative intensities,
/// out-of-range reflectance, non-finite values, ...).
class ContractError : public Error {
 public:
  using Error::Error;
};

/// An operation parameter is outside its legal range (even window size,
/// non-positive epsilon, ...).
class ParameterError : public Error {
 public:
  using Error::Error;
};

class ShapeError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Region statistics were requested on an empty foreground or background.
class EmptyRegionError : public Error {
 public:
  using Error::Error;
};

/// A synthetic-image specification cannot be realized without clamping.
class SpecError : public Error {
 public:
  using Error::Error;
};

/// Thresholding was asked to split a map with no dynamic range.
class FlatInputError : public Error {
 public:
  using Error::Error;
};

/// The decomposition solver produced a non-finite objective.
class SolverError : public Error {
 public:
  SolverError(const std::string& what, int iteration)
      : Error(what + " (iteration " + std::to_string(iteration) + ")"), iteration_(iteration) {}

  int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace ridekit
