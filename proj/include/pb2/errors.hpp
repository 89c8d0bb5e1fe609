#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace pb2 {

/// Base for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class MissingDimension : public Error {
 public:
  using Error::Error;
};

class OutOfBounds : public Error {
 public:
  using Error::Error;
};

class DimMismatch : public Error {
 public:
  using Error::Error;
};

/// A GP query was made at a time index earlier than some of its data.
class TimeOrder : public Error {
 public:
  using Error::Error;
};

/// Cholesky factorization failed even at the largest jitter.
class NumericalFailure : public Error {
 public:
  using Error::Error;
};

class NoCandidates : public Error {
 public:
  using Error::Error;
};

class Unsupported : public Error {
 public:
  using Error::Error;
};

class StorageError : public Error {
 public:
  using Error::Error;
};

class ParseError : public Error {
 public:
  ParseError(std::size_t line, const std::string &what)
      : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class ResumeMismatch : public Error {
 public:
  using Error::Error;
};

/// Raised when a trainer cannot advance an agent (e.g. a non-finite score).
class TrainerFailure : public Error {
 public:
  using Error::Error;
};

/// Invalid run configuration; `field` names the offending dotted path.
class ConfigError : public Error {
 public:
  ConfigError(std::string field, const std::string &what)
      : Error(field + ": " + what), field_(std::move(field)) {}

  const std::string &field() const noexcept { return field_; }

 private:
  std::string field_;
};

}  // namespace pb2
