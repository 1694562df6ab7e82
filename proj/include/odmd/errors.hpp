#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace odmd {

// Base class for every error raised by the library. The C API maps each
// concrete type onto an odmd_status code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Argument outside the mathematical domain (non-positive depth, ...).
class DomainError : public Error {
 public:
  using Error::Error;
};

// The observations do not constrain depth (no expansion, no parallax,
// rank-deficient least-squares system).
class DegenerateGeometry : public Error {
 public:
  explicit DegenerateGeometry(const std::string& what, double condition = 0.0)
      : Error(what), condition_(condition) {}
  double condition() const { return condition_; }

 private:
  double condition_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Malformed text or binary input. line is 1-based, 0 when unknown; offset is
// the byte offset within the line (or file for binary formats).
class ParseError : public Error {
 public:
  ParseError(const std::string& what, std::size_t line = 0,
             std::size_t offset = 0)
      : Error(format(what, line, offset)), line_(line), offset_(offset) {}
  std::size_t line() const { return line_; }
  std::size_t offset() const { return offset_; }

 private:
  static std::string format(const std::string& what, std::size_t line,
                            std::size_t offset) {
    if (line == 0 && offset == 0) return what;
    return what + " (line " + std::to_string(line) + ", offset " +
           std::to_string(offset) + ")";
  }
  std::size_t line_;
  std::size_t offset_;
};

// Unsupported schema/format version, or a corrupted versioned file.
class VersionError : public Error {
 public:
  using Error::Error;
};

// Invalid user-provided data (empty mask, no detections, ...).
class InputError : public Error {
 public:
  using Error::Error;
};

// API misuse: mismatched shapes, wrong sizes.
class ContractError : public Error {
 public:
  using Error::Error;
};

// Non-finite values during training.
class NumericError : public Error {
 public:
  using Error::Error;
};

// A model and a dataset (or config) that cannot be used together.
class CompatibilityError : public Error {
 public:
  using Error::Error;
};

class IoError : public Error {
 public:
  using Error::Error;
};

}  // namespace odmd
