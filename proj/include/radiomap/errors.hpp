#pragma once

#include <stdexcept>
#include <string>

namespace radiomap {

/// Root of all library errors.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Caller violated an operation's precondition.
class DomainError : public Error {
 public:
  using Error::Error;
};

/// Input file or record could not be parsed.
class MalformedInput : public Error {
 public:
  using Error::Error;
};

/// Input parsed but its parts disagree (e.g. declared dims vs payload length).
class StructuralError : public Error {
 public:
  using Error::Error;
};

/// Attempt to overwrite a terminal state with a different terminal state.
class ConflictError : public Error {
 public:
  using Error::Error;
};

/// Scene geometry cannot support the requested query (e.g. no ray hits any surface).
class DegenerateScene : public Error {
 public:
  using Error::Error;
};

/// A partition region has no reachable free space.
class EmptyRegion : public Error {
 public:
  using Error::Error;
};

/// NaN or Inf produced where a finite value is required.
class NumericFault : public Error {
 public:
  using Error::Error;
};

/// Checkpoint cannot be read by this build or does not match the expected network.
class IncompatibleCheckpoint : public Error {
 public:
  using Error::Error;
};

}  // namespace radiomap
