#pragma once

#include <stdexcept>
#include <string>

namespace surfer {

// Every error raised by the library derives from Error. The CLI maps the
// concrete type onto its exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Bad configuration, missing files, malformed inputs. Exit code 2.
class ConfigError : public Error {
 public:
  using Error::Error;
};

// Scene/instruction generation or motion planning failed. Exit code 3.
class GenerationError : public Error {
 public:
  using Error::Error;
};

class PlanningError : public GenerationError {
 public:
  using GenerationError::GenerationError;
};

// NaN/Inf detected in a tensor, gradient or loss. Exit code 4.
class NumericError : public Error {
 public:
  using Error::Error;
};

// Incompatible tensor shapes.
class ShapeError : public Error {
 public:
  using Error::Error;
};

// A task whose skill cannot apply to its target (e.g. opening a bottle).
class TaskDefinitionError : public Error {
 public:
  using Error::Error;
};

}  // namespace surfer
