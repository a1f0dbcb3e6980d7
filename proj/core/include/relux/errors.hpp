#pragma once

#include <stdexcept>
#include <string>

namespace relux {

/// Base class for all library errors.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

/// A caller violated a precondition (bad dimension, invalid parameter, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

/// The oracle's query budget is exhausted.
class BudgetError : public Error {
 public:
  using Error::Error;
};

/// Socket-level failure (bind, connect, broken pipe).
class TransportError : public Error {
 public:
  using Error::Error;
};

/// A wire message violated the protocol.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

/// A numeric routine failed to converge or hit a singular system.
class NumericalError : public Error {
 public:
  using Error::Error;
};

/// A derived quantity exceeded a configured cap.
class ResourceError : public Error {
 public:
  using Error::Error;
};

/// A structural invariant failed after construction.
class InconsistencyError : public Error {
 public:
  using Error::Error;
};

/// File I/O or parse failure.
class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace relux
