#pragma once

#include <stdexcept>
#include <string>

namespace raypath {

// Error hierarchy shared by all modules. Each condition gets its own type so
// callers (and the CLI exit-code mapping) can discriminate without parsing
// messages.

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// geometry
struct CoincidentEndpoints : Error {
  using Error::Error;
};

// tracer / eval
struct BudgetExceeded : Error {
  using Error::Error;
};

// nn
struct ShapeMismatch : Error {
  using Error::Error;
};
struct EmptyScene : Error {
  using Error::Error;
};
struct IndexOutOfRange : Error {
  using Error::Error;
};

// checkpoint / file I/O
struct IoError : Error {
  using Error::Error;
};
struct BadMagic : Error {
  using Error::Error;
};
struct VersionMismatch : Error {
  using Error::Error;
};
struct CorruptTensor : Error {
  using Error::Error;
};

// scene files
struct ParseError : Error {
  ParseError(const std::string& msg, int line)
      : Error(msg + " (line " + std::to_string(line) + ")"), line_number(line) {}
  int line_number;
};
struct NonTriangleFace : ParseError {
  using ParseError::ParseError;
};

// sampler / trainer
struct IncompleteTrajectory : Error {
  using Error::Error;
};
struct PushInvalid : Error {
  using Error::Error;
};

// eval
struct GridMismatch : Error {
  using Error::Error;
};

// cli
struct BadFlag : Error {
  using Error::Error;
};

}  // namespace raypath
