#pragma once

#include <stdexcept>
#include <string>

namespace azarnet {

// Base of every error raised by the library. Subclasses name the failure
// category so callers (and the CLI) can map them to exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

// Well-formed container holding something we do not decode (codec, bit depth).
class FormatError : public Error {
 public:
  using Error::Error;
};

class CorruptFileError : public Error {
 public:
  using Error::Error;
};

// Backward called without a matching train-mode forward, and similar.
class StateError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  using Error::Error;
};

class ValidationError : public Error {
 public:
  using Error::Error;
};

class NonFiniteLossError : public Error {
 public:
  NonFiniteLossError(int epoch, int batch, double value);

  int epoch() const noexcept { return epoch_; }
  int batch() const noexcept { return batch_; }
  double value() const noexcept { return value_; }

 private:
  int epoch_;
  int batch_;
  double value_;
};

}  // namespace azarnet
