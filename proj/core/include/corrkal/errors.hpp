#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace corrkal {

/// Vector or matrix sizes that do not agree with the model orders.
class DimensionError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid configuration values (R <= 0, empty seed list, unknown keys ...).
class ConfigError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// A covariance that is not positive semidefinite within tolerance.
class PsdError : public std::domain_error {
 public:
  PsdError(const std::string& what, double min_eigenvalue)
      : std::domain_error(what), min_eigenvalue_(min_eigenvalue) {}
  double min_eigenvalue() const noexcept { return min_eigenvalue_; }

 private:
  double min_eigenvalue_;
};

/// Non-positive innovation variance or similar breakdown inside a filter step.
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Parameter estimate blew past the divergence guard.
class DivergenceError : public std::runtime_error {
 public:
  DivergenceError(const std::string& what, std::size_t t)
      : std::runtime_error(what), t_(t) {}
  std::size_t time_index() const noexcept { return t_; }

 private:
  std::size_t t_;
};

/// Malformed dataset or config file. Line numbers are 1-based; 0 means "whole file".
class ParseError : public std::runtime_error {
 public:
  ParseError(const std::string& what, std::size_t line)
      : std::runtime_error(line ? what + " (line " + std::to_string(line) + ")" : what),
        line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

}  // namespace corrkal
