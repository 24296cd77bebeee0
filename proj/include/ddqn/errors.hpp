#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace ddqn {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Data-file problems carry the 1-based line number of the offending row.
struct DataError : Error {
  DataError(const std::string& what, std::size_t line)
      : Error(what + " (line " + std::to_string(line) + ")"), line_no(line) {}
  std::size_t line_no;
};

struct MalformedRow : DataError {
  using DataError::DataError;
};
struct InvariantViolation : DataError {
  using DataError::DataError;
};
struct NonMonotonicTimestamp : DataError {
  using DataError::DataError;
};

struct EmptySeries : Error {
  using Error::Error;
};
struct SeriesTooShort : Error {
  using Error::Error;
};
struct SteppedAfterDone : Error {
  using Error::Error;
};
struct ShapeMismatch : Error {
  using Error::Error;
};
struct KernelTooLarge : Error {
  using Error::Error;
};
struct StaleCache : Error {
  using Error::Error;
};
struct ArchitectureMismatch : Error {
  using Error::Error;
};
struct InsufficientData : Error {
  using Error::Error;
};
struct CheckpointMismatch : Error {
  using Error::Error;
};

// `field` is a dotted path into the config document, e.g. "env.window_n".
struct ConfigInvalid : Error {
  ConfigInvalid(const std::string& field, const std::string& why)
      : Error("invalid config field '" + field + "': " + why), field_path(field) {}
  std::string field_path;
};

}  // namespace ddqn
