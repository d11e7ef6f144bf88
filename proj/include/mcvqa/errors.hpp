#pragma once

#include <stdexcept>
#include <string>

namespace mcvqa {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class VocabularyError : public Error {
 public:
  using Error::Error;
};

class EmptySequenceError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class NumericError : public Error {
 public:
  using Error::Error;
};

class LengthError : public Error {
 public:
  using Error::Error;
};

class AlignmentError : public Error {
 public:
  using Error::Error;
};

/// Malformed text input. `line()` is 1-based; 0 when not line-oriented.
class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line, const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

 private:
  std::size_t line_;
};

class DuplicateTokenError : public Error {
 public:
  using Error::Error;
};

class MissingImageError : public Error {
 public:
  using Error::Error;
};

class SplitContaminationError : public Error {
 public:
  using Error::Error;
};

// Binary file loading.
class LoadError : public Error {
 public:
  using Error::Error;
};

class CorruptFileError : public LoadError {
 public:
  using LoadError::LoadError;
};

class TruncatedFileError : public CorruptFileError {
 public:
  using CorruptFileError::CorruptFileError;
};

class VersionMismatchError : public LoadError {
 public:
  using LoadError::LoadError;
};

class ShapeMismatchError : public LoadError {
 public:
  using LoadError::LoadError;
};

class VariantMismatchError : public LoadError {
 public:
  using LoadError::LoadError;
};

}  // namespace mcvqa
