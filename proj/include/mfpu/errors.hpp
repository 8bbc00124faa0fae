#pragma once

#include <stdexcept>
#include <string>
#include <string_view>

namespace mfpu {

// Caller broke a documented precondition (bad shape, bad argument range).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// File could not be opened, read or written.
class IoError : public std::runtime_error {
 public:
  explicit IoError(const std::string& what) : std::runtime_error(what) {}
};

// File was readable but its content is malformed.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// The measurement pipeline could not produce a value for this mask.
class MeasurementError : public std::runtime_error {
 public:
  explicit MeasurementError(const std::string& what) : std::runtime_error(what) {}
};

// Training diverged (non-finite loss).
class NumericalError : public std::runtime_error {
 public:
  explicit NumericalError(const std::string& what) : std::runtime_error(what) {}
};

inline void require(bool condition, std::string_view message) {
  if (!condition) throw ContractViolation(std::string(message));
}

}  // namespace mfpu
