#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace cellflow {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UnknownGroupError : public Error {
 public:
  using Error::Error;
};

/// A trajectory produced a non-finite coordinate.
class DivergenceError : public Error {
 public:
  DivergenceError(std::size_t point_index, const std::string& what)
      : Error(what), point_index_(point_index) {}
  std::size_t point_index() const noexcept { return point_index_; }

 private:
  std::size_t point_index_;
};

class InfeasibleFractionError : public Error {
 public:
  using Error::Error;
};

class MeshingError : public Error {
 public:
  using Error::Error;
};

class ElementInversionError : public Error {
 public:
  ElementInversionError(std::size_t element, double ratio, const std::string& what)
      : Error(what), element_(element), ratio_(ratio) {}
  std::size_t element() const noexcept { return element_; }
  double ratio() const noexcept { return ratio_; }

 private:
  std::size_t element_;
  double ratio_;
};

class NonPositiveJacobianError : public Error {
 public:
  NonPositiveJacobianError(std::ptrdiff_t element, const std::string& what)
      : Error(what), element_(element) {}
  /// Element index, or -1 when raised for a bare deformation gradient.
  std::ptrdiff_t element() const noexcept { return element_; }

 private:
  std::ptrdiff_t element_;
};

class NonConvergenceError : public Error {
 public:
  NonConvergenceError(int last_increment, const std::string& what)
      : Error(what), last_increment_(last_increment) {}
  /// Index of the last increment that converged (0 means none).
  int last_increment() const noexcept { return last_increment_; }

 private:
  int last_increment_;
};

class UnconvergedIncrementError : public Error {
 public:
  using Error::Error;
};

class EmptyNodeSetError : public Error {
 public:
  using Error::Error;
};

class SingularHessianError : public Error {
 public:
  using Error::Error;
};

class NonFiniteGradientError : public Error {
 public:
  using Error::Error;
};

class AllRestartsFailedError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointMismatchError : public Error {
 public:
  using Error::Error;
};

}  // namespace cellflow
