#pragma once

#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>

namespace qdent {

/// Base for all library errors. Each kind maps onto a CLI exit code.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
  virtual int exit_code() const noexcept = 0;
  virtual const char* kind() const noexcept = 0;
};

class InvalidInput : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 2; }
  const char* kind() const noexcept override { return "invalid_input"; }
};

/// A quantity could not be estimated from the data (degenerate counts,
/// missing side peaks, failed fit, ...).
class EstimationFailure : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 3; }
  const char* kind() const noexcept override { return "estimation_failure"; }
};

class IoError : public Error {
 public:
  using Error::Error;
  int exit_code() const noexcept override { return 4; }
  const char* kind() const noexcept override { return "io_error"; }
};

/// Malformed file content. Carries the file and the byte offset (or line
/// number for text formats) where parsing stopped.
class FormatError : public InvalidInput {
 public:
  FormatError(std::string file, std::uint64_t offset, std::string reason)
      : InvalidInput(file + " @" + std::to_string(offset) + ": " + reason),
        file_(std::move(file)),
        offset_(offset),
        reason_(std::move(reason)) {}

  const std::string& file() const noexcept { return file_; }
  std::uint64_t offset() const noexcept { return offset_; }
  const std::string& reason() const noexcept { return reason_; }
  const char* kind() const noexcept override { return "format_error"; }

 private:
  std::string file_;
  std::uint64_t offset_;
  std::string reason_;
};

inline void require(bool condition, const std::string& message) {
  if (!condition) throw InvalidInput(message);
}

}  // namespace qdent
