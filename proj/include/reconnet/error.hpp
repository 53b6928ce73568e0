#pragma once

#include <stdexcept>
#include <string>

namespace reconnet {

// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Inconsistent configuration: channel/length mismatches, missing artifacts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// A function argument outside its documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

// Malformed or truncated file contents.
class FormatError : public Error {
 public:
  using Error::Error;
};

// Operation invoked in the wrong state (e.g. backward without forward).
class StateError : public Error {
 public:
  using Error::Error;
};

// Iterative solver produced a non-finite iterate.
class SolverError : public Error {
 public:
  using Error::Error;
};

// Training diverged or could not proceed.
class TrainingError : public Error {
 public:
  using Error::Error;
};

// File system failures (unreadable input, unwritable output).
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace reconnet
