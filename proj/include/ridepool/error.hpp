#pragma once

#include <stdexcept>
#include <string>

namespace ridepool {

class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

// A car violates capacity, wait or driver constraints.
class InvalidCarError : public Error {
public:
  using Error::Error;
};

class InvalidInputError : public Error {
public:
  using Error::Error;
};

class ConfigError : public Error {
public:
  using Error::Error;
};

// Malformed external data (missing CSV column, bad stream line, ...).
class FormatError : public Error {
public:
  using Error::Error;
};

class NumericOverflowError : public Error {
public:
  NumericOverflowError(const std::string& what, int step)
      : Error(what + " (step " + std::to_string(step) + ")"), step_(step) {}
  int step() const noexcept { return step_; }

private:
  int step_;
};

class InvalidComparisonError : public Error {
public:
  using Error::Error;
};

// Internal invariant broken during a simulation run.
class InvariantError : public Error {
public:
  InvariantError(const std::string& what, int step)
      : Error("invariant violated at step " + std::to_string(step) + ": " + what), step_(step) {}
  int step() const noexcept { return step_; }

private:
  int step_;
};

}  // namespace ridepool
