#pragma once

#include <stdexcept>
#include <string>

namespace dhn {

/// Input data violates a documented invariant. `pointer()` is a JSON pointer
/// into the scenario document when the error originates from a file, or a
/// symbolic location otherwise.
class ValidationError : public std::runtime_error {
 public:
  ValidationError(std::string pointer, const std::string& message)
      : std::runtime_error(pointer.empty() ? message : pointer + ": " + message),
        pointer_(std::move(pointer)) {}

  const std::string& pointer() const noexcept { return pointer_; }

 private:
  std::string pointer_;
};

/// A numerical procedure failed (irregular pencil, resonance, no convergence).
class NumericalError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace dhn
