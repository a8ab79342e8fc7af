#pragma once

#include <stdexcept>
#include <string>

namespace bsmp {

/// Numeric error categories; values are shared with the C API status codes.
enum class ErrorCode : int {
  Configuration = 1,
  Numerical = 2,
  GradientMismatch = 3,
  OracleInapplicable = 4,
  InvariantViolation = 5,
  Io = 6,
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

class ConfigError : public Error {
 public:
  explicit ConfigError(const std::string& what) : Error(ErrorCode::Configuration, what) {}
};

/// Raised for singular regressions and for non-finite values during a sweep.
class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what) : Error(ErrorCode::Numerical, what) {}
};

class DivergenceError : public NumericalError {
 public:
  DivergenceError(const std::string& stage, int node, int path)
      : NumericalError(stage + ": non-finite value at node " + std::to_string(node) + ", path " +
                       std::to_string(path)),
        node_(node),
        path_(path) {}
  int node() const noexcept { return node_; }
  int path() const noexcept { return path_; }

 private:
  int node_;
  int path_;
};

class GradientMismatchError : public Error {
 public:
  GradientMismatchError(const std::string& partial, double rel_error)
      : Error(ErrorCode::GradientMismatch,
              "analytic partial " + partial + " disagrees with finite differences (rel. error " +
                  std::to_string(rel_error) + ")"),
        partial_(partial),
        rel_error_(rel_error) {}
  const std::string& partial() const noexcept { return partial_; }
  double relative_error() const noexcept { return rel_error_; }

 private:
  std::string partial_;
  double rel_error_;
};

class OracleError : public Error {
 public:
  explicit OracleError(const std::string& what) : Error(ErrorCode::OracleInapplicable, what) {}
};

class InvariantViolation : public Error {
 public:
  explicit InvariantViolation(const std::string& what)
      : Error(ErrorCode::InvariantViolation, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorCode::Io, what) {}
};

}  // namespace bsmp
