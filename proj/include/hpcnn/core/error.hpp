#ifndef HPCNN_CORE_ERROR_HPP
#define HPCNN_CORE_ERROR_HPP

#include <stdexcept>
#include <string>

namespace hpcnn {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not conform (matmul inner dims, channel counts, ...).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// A caller-supplied argument is outside its documented domain.
class ArgumentError : public Error {
 public:
  using Error::Error;
};

/// Dataset files are missing, mis-sized or contain invalid records.
class DataError : public Error {
 public:
  using Error::Error;
};

/// A checkpoint or cache file is truncated or fails its integrity check.
class CorruptionError : public Error {
 public:
  using Error::Error;
};

/// An output file or directory could not be written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Run configuration rejected before any work starts.
class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hpcnn

#endif  // HPCNN_CORE_ERROR_HPP
