#pragma once

#include <stdexcept>
#include <string>

namespace symsel {

// Bad input: malformed files, inconsistent shapes, violated preconditions.
// The CLI maps this family to exit code 1.
class ValidationError : public std::invalid_argument {
public:
  explicit ValidationError(const std::string& what) : std::invalid_argument(what) {}
};

// Numeric failures (domain errors, divergence, broken internal identities).
// The CLI maps this family to exit code 2.
class NumericError : public std::runtime_error {
public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

// A group (or search) grew past the configured element cap.
class CapacityError : public NumericError {
public:
  CapacityError(const std::string& what, std::size_t cap)
      : NumericError(what + " (cap " + std::to_string(cap) + ")"), cap_(cap) {}
  std::size_t cap() const noexcept { return cap_; }

private:
  std::size_t cap_;
};

// n <= Nd + 1 and similar out-of-domain requests for closed-form formulas.
class DomainError : public NumericError {
public:
  using NumericError::NumericError;
};

// An identity that must hold exactly (Burnside count, integrality) did not.
class ConsistencyError : public NumericError {
public:
  using NumericError::NumericError;
};

class UnsupportedGroupError : public ValidationError {
public:
  using ValidationError::ValidationError;
};

// No crossing exists because the large group's anti-part of the target is zero.
class NoCrossingError : public NumericError {
public:
  using NumericError::NumericError;
};

class StaleTapeError : public std::logic_error {
public:
  explicit StaleTapeError(const std::string& what) : std::logic_error(what) {}
};

class DivergenceError : public NumericError {
public:
  DivergenceError(const std::string& what, std::size_t step) : NumericError(what), step_(step) {}
  std::size_t step() const noexcept { return step_; }

private:
  std::size_t step_;
};

}  // namespace symsel
