#pragma once

#include <stdexcept>
#include <string>

namespace dvip {

// Caller broke a documented precondition (shape mismatch, bad axis, ...).
class ContractViolation : public std::logic_error {
 public:
  explicit ContractViolation(const std::string& what) : std::logic_error(what) {}
};

// Problem with an input file: missing, malformed, wrong arity.
class DataError : public std::runtime_error {
 public:
  explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

// Problem with a config file or checkpoint: unknown key, bad magic, truncation.
class FormatError : public std::runtime_error {
 public:
  explicit FormatError(const std::string& what) : std::runtime_error(what) {}
};

// A numeric quantity left its valid domain (non-finite objective or gradient).
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace dvip
