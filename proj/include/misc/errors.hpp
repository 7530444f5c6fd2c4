#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace misc {

// Shape or parameter inconsistency in how an operation or model is set up.
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Caller-supplied data that violates a precondition (e.g. odd image size).
class InputError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// File format and filesystem failures. Carries the byte offset where a
// container stopped making sense, when there is one.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what, std::int64_t offset = -1)
      : std::runtime_error(offset < 0 ? what : what + " (at byte " + std::to_string(offset) + ")"),
        offset_(offset) {}
  std::int64_t offset() const { return offset_; }

 private:
  std::int64_t offset_;
};

// NaN/Inf where finite values are required, or a failed numerical check.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace misc
