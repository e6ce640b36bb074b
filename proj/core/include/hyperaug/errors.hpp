#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace hyperaug {

/// Base of every error raised by the toolkit.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Bad magic, malformed header, unparsable text record.
class FormatError : public Error {
 public:
  using Error::Error;
};

/// Payload shorter or longer than its header declares.
class TruncatedError : public Error {
 public:
  using Error::Error;
};

/// Payload is well-formed but violates a value invariant (e.g. NaN).
class DataError : public Error {
 public:
  using Error::Error;
};

class DimError : public Error {
 public:
  using Error::Error;
};

/// Not enough samples (or variance) for the requested statistic.
class DegenerateError : public Error {
 public:
  using Error::Error;
};

class InsufficientDataError : public Error {
 public:
  using Error::Error;
};

class InsufficientClassError : public InsufficientDataError {
 public:
  InsufficientClassError(std::uint16_t class_id, const std::string& what)
      : InsufficientDataError(what), class_id_(class_id) {}

  std::uint16_t class_id() const noexcept { return class_id_; }

 private:
  std::uint16_t class_id_;
};

/// A sample refers to a class the model has never seen.
class ClassError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

}  // namespace hyperaug
