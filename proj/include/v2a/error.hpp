#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace v2a {

// Every failure raised by the library derives from Error. The CLI maps the
// concrete type onto an exit code, so keep the hierarchy flat and explicit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes that do not line up for an operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Layer or pipeline configuration that yields an impossible geometry.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// A caller broke an operation's precondition.
class ContractError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf showed up where finite values are required.
class NumericError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t byte_offset)
      : Error(what + " (at byte " + std::to_string(byte_offset) + ")"),
        offset_(byte_offset) {}

  std::size_t offset() const noexcept { return offset_; }

  // Same error with `context` (typically a file path) in front of the message.
  ParseError in_context(const std::string& context) const {
    return ParseError(context + ": " + what(), offset_, Prefixed{});
  }

 private:
  struct Prefixed {};
  ParseError(const std::string& message, std::size_t byte_offset, Prefixed)
      : Error(message), offset_(byte_offset) {}

  std::size_t offset_;
};

class UnsupportedFormatError : public Error {
 public:
  using Error::Error;
};

/// Video and audio (or audio and network output) disagree in length.
class AlignmentError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

/// Config values that parse but violate an invariant.
class ValidationError : public Error {
 public:
  using Error::Error;
};

class UnknownKeyError : public ValidationError {
 public:
  explicit UnknownKeyError(const std::string& key)
      : ValidationError("unknown config key '" + key + "'"), key_(key) {}

  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Dataset directory problems (empty set, unreadable pairs).
class DataError : public Error {
 public:
  using Error::Error;
};

class CheckpointError : public Error {
 public:
  using Error::Error;
};

class VersionMismatchError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class TruncationError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class ChecksumError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

class StageError : public CheckpointError {
 public:
  using CheckpointError::CheckpointError;
};

}  // namespace v2a
