#pragma once

#include <stdexcept>
#include <string>

namespace dipolium {

/// Base of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// Argument outside the mathematical domain of an operation
/// (non-positive frequency, point inside the sphere, r == r', ...).
class DomainError : public Error
{
public:
  using Error::Error;
};

/// A series, quadrature or time march failed to reach its accuracy target.
class ConvergenceError : public Error
{
public:
  ConvergenceError(const std::string& what, double estimate = 0.0)
      : Error(what), estimate_(estimate)
  {
  }
  /// Last error/tail estimate available when the failure was detected.
  double estimate() const noexcept { return estimate_; }

private:
  double estimate_;
};

/// Malformed or physically invalid scenario configuration.
class ConfigError : public Error
{
public:
  ConfigError(const std::string& what, int line = 0)
      : Error(line > 0 ? "line " + std::to_string(line) + ": " + what : what),
        line_(line)
  {
  }
  int line() const noexcept { return line_; }

private:
  int line_;
};

} // namespace dipolium
