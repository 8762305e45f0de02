#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace svi {

// Caller supplied inconsistent arguments (dimension mismatch, bad index,
// invalid parameter).
class UsageError : public std::invalid_argument {
 public:
  using std::invalid_argument::invalid_argument;
};

// A point lies outside the effective domain where the operation requires it
// to be inside.
class DomainError : public std::domain_error {
 public:
  using std::domain_error::domain_error;
};

// Non-finite values produced during time stepping.
class NumericalError : public std::runtime_error {
 public:
  NumericalError(const std::string& what, std::size_t step)
      : std::runtime_error(what + " (step " + std::to_string(step) + ")"),
        step_(step) {}

  std::size_t step() const noexcept { return step_; }

 private:
  std::size_t step_;
};

}  // namespace svi
