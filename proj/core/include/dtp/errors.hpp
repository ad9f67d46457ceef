#pragma once

#include <limits>
#include <stdexcept>
#include <string>

namespace dtp {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A forward, decode or target computation produced a non-finite value.
class NumericalOverflowError : public Error {
 public:
  NumericalOverflowError(int layer, const std::string& what)
      : Error("non-finite value at layer " + std::to_string(layer) + ": " + what), layer_(layer) {}
  int layer() const noexcept { return layer_; }

 private:
  int layer_;
};

/// An inverse iteration stopped contracting. `layer` is -1 when the
/// iteration was run on a standalone encoder/decoder pair.
class NonContractiveError : public Error {
 public:
  NonContractiveError(int layer, double alpha, const std::string& what)
      : Error(what), layer_(layer), alpha_(alpha) {}
  int layer() const noexcept { return layer_; }
  double estimated_alpha() const noexcept { return alpha_; }

 private:
  int layer_;
  double alpha_;
};

/// A linear system the oracle was asked to solve is (numerically) singular.
class SingularSystemError : public Error {
 public:
  SingularSystemError(double smallest_eigenvalue, const std::string& what)
      : Error(what), smallest_eigenvalue_(smallest_eigenvalue) {}
  double smallest_eigenvalue() const noexcept { return smallest_eigenvalue_; }

 private:
  double smallest_eigenvalue_;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

/// Malformed input file. `line` is 1-based, 0 when not line oriented.
class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string& what)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class TrainingAbortedError : public Error {
 public:
  using Error::Error;
};

}  // namespace dtp
