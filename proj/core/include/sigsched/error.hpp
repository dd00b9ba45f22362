#pragma once

#include <stdexcept>
#include <string>

namespace sigsched {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A scenario or network description violates a structural rule.
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Scheduler input was rejected, or the split loop failed to settle.
class SchedulerError : public Error {
 public:
  using Error::Error;
};

/// An internal simulator invariant broke (conservation, capacity).
class InvariantViolation : public Error {
 public:
  using Error::Error;
};

}  // namespace sigsched
