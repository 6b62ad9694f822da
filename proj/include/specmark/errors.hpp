#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace specmark {

// Base class for all toolkit errors. Subclasses map 1:1 onto the failure
// modes the operations document, so callers can catch narrowly.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidConfig : Error {
  using Error::Error;
};
struct InputTooShort : Error {
  using Error::Error;
};
struct InputTooSmall : Error {
  using Error::Error;
};
struct FormatError : Error {
  using Error::Error;
};
struct Unsupported : Error {
  using Error::Error;
};
struct ShapeError : Error {
  using Error::Error;
};
struct IndexError : Error {
  using Error::Error;
};
struct CapacityError : Error {
  using Error::Error;
};
struct GenerationError : Error {
  using Error::Error;
};

// Thrown when a training loss turns non-finite; carries the offending step.
struct DivergenceError : Error {
  std::size_t step;
  DivergenceError(const std::string& msg, std::size_t at)
      : Error(msg + " (step " + std::to_string(at) + ")"), step(at) {}
};

}  // namespace specmark
