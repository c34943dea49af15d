#pragma once

#include <stdexcept>
#include <string>

namespace hyper {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Mismatched grid sizes, trajectory lengths or architecture shapes.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A precondition on an argument (range, sign, non-emptiness) was violated.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// Explicit diffusion step exceeds the stability limit.
class StabilityError : public Error {
 public:
  using Error::Error;
};

/// Iterative solver did not reach tolerance within its iteration budget.
class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double residual, int iterations)
      : Error(what), residual_(residual), iterations_(iterations) {}
  double residual() const { return residual_; }
  int iterations() const { return iterations_; }

 private:
  double residual_;
  int iterations_;
};

/// Training produced a non-finite loss or gradient.
class TrainingDivergence : public Error {
 public:
  using Error::Error;
};

/// Binary file decoding failure. The kind distinguishes the failure mode.
class FormatError : public Error {
 public:
  enum class Kind { bad_magic, version, truncated, checksum, architecture, io };

  FormatError(Kind kind, const std::string& what) : Error(what), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

/// Invalid run configuration (unknown key, bad value). Maps to exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hyper
