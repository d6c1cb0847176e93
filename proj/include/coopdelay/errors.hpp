#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace coopdelay {

/// Malformed expression text. `position` is the 1-based column of the
/// offending character (one past the end for premature end of input).
class ParseError : public std::runtime_error {
 public:
  ParseError(std::string message, std::size_t position, std::vector<std::string> expected)
      : std::runtime_error(std::move(message)), position_(position), expected_(std::move(expected)) {}

  std::size_t position() const noexcept { return position_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t position_;
  std::vector<std::string> expected_;
};

enum class DomainKind { LogOfNonPositive, SqrtOfNegative, DivisionByZero, NonFinite };

/// Evaluation left the real domain of an operation, or overflowed.
class DomainError : public std::runtime_error {
 public:
  DomainError(DomainKind kind, const std::string& message) : std::runtime_error(message), kind_(kind) {}
  DomainKind kind() const noexcept { return kind_; }

 private:
  DomainKind kind_;
};

/// Inverse requested above f(bracket_hi); the caller has to enlarge the interval.
class RangeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A history lookup reached before the retained start of the trajectory.
class HistoryUnderflow : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// A model or configuration fails one of the structural assumptions.
/// `key` names the offending component (config key when loaded from a file).
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string key, const std::string& message)
      : std::runtime_error(key + ": " + message), key_(std::move(key)) {}
  const std::string& key() const noexcept { return key_; }

 private:
  std::string key_;
};

/// Numerical failure inside an algorithm (step too large, stalled iteration,
/// construction that cannot meet its strict inequalities).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace coopdelay
