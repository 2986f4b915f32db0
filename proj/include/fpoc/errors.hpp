#pragma once

#include <stdexcept>
#include <string>

namespace fpoc {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A caller supplied a value outside an operation's domain.
class InvalidInput : public Error {
 public:
  using Error::Error;
};

/// Scenario parse or validation failure. `field()` names the offending key
/// (empty for syntax errors).
class ScenarioError : public Error {
 public:
  ScenarioError(std::string field, const std::string& what)
      : Error(what), field_(std::move(field)) {}
  const std::string& field() const noexcept { return field_; }

 private:
  std::string field_;
};

/// Time integration produced a non-finite state.
class DivergenceError : public Error {
 public:
  DivergenceError(double time, const std::string& what) : Error(what), time_(time) {}
  double time() const noexcept { return time_; }

 private:
  double time_;
};

/// A tridiagonal solve lost its positive pivots.
class SingularOperator : public Error {
 public:
  SingularOperator(int axis, std::size_t line, const std::string& what)
      : Error(what), axis_(axis), line_(line) {}
  int axis() const noexcept { return axis_; }
  std::size_t line() const noexcept { return line_; }

 private:
  int axis_;
  std::size_t line_;
};

/// A runtime diagnostic (mass, alignment, gradient audit) failed.
class DiagnosticsError : public Error {
 public:
  using Error::Error;
};

}  // namespace fpoc
