#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace glam {

/// Thrown when tensor extents are incompatible with an operation.
class ShapeError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

/// Thrown when a numerical computation leaves the finite domain.
class NumericError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed on-disk data. Carries the byte offset and the field being read.
class FormatError : public std::runtime_error {
 public:
  FormatError(const std::string& format, std::size_t offset, const std::string& field,
              const std::string& what)
      : std::runtime_error(format + ": " + what + " at byte offset " + std::to_string(offset) +
                           " (field: " + field + ")"),
        offset_(offset),
        field_(field) {}

  std::size_t offset() const noexcept { return offset_; }
  const std::string& field() const noexcept { return field_; }

 private:
  std::size_t offset_;
  std::string field_;
};

}  // namespace glam
