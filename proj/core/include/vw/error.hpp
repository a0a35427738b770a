#pragma once

#include <stdexcept>
#include <string>

namespace vw {

/// Root of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration or out-of-domain argument.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// Terrain query outside the valid region of a heightmap.
class QueryError : public Error {
 public:
  using Error::Error;
};

/// A wheel footprint left the map. The harness records this as a failed trial.
class BoundaryError : public Error {
 public:
  using Error::Error;
};

/// Tensor or image dimensions that do not fit the operation.
class ShapeError : public Error {
 public:
  using Error::Error;
};

/// Missing or unusable input data (empty datasets, absent classes, ...).
class DataError : public Error {
 public:
  using Error::Error;
};

/// Filesystem failure while reading or writing artifacts.
class StorageError : public Error {
 public:
  using Error::Error;
};

/// Context id with no entry in the parameter library.
class LibraryError : public Error {
 public:
  using Error::Error;
};

/// Malformed wire-protocol message.
class ProtocolError : public Error {
 public:
  using Error::Error;
};

}  // namespace vw
