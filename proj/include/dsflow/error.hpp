#pragma once

#include <cstddef>
#include <memory>
#include <stdexcept>
#include <string>

namespace dsflow {

struct Trajectory;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Non-finite values in an input that must be finite.
class NumericInputError : public Error {
 public:
  using Error::Error;
};

// A matrix is too close to singular for the requested operation.
class ConditioningError : public Error {
 public:
  using Error::Error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class SizeError : public Error {
 public:
  using Error::Error;
};

class ConvergenceError : public Error {
 public:
  ConvergenceError(const std::string& what, double violation, std::size_t iterations)
      : Error(what), violation_(violation), iterations_(iterations) {}
  double violation() const noexcept { return violation_; }
  std::size_t iterations() const noexcept { return iterations_; }

 private:
  double violation_;
  std::size_t iterations_;
};

class DegenerateClassError : public Error {
 public:
  DegenerateClassError(const std::string& what, int label) : Error(what), label_(label) {}
  int label() const noexcept { return label_; }

 private:
  int label_;
};

class FlowDivergenceError : public Error {
 public:
  FlowDivergenceError(const std::string& what, std::size_t step) : Error(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }
  // Snapshots recorded before the failure; set by run_flow.
  std::shared_ptr<const Trajectory> partial;

 private:
  std::size_t step_;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line) : Error(what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace dsflow
