#pragma once

#include <stdexcept>
#include <string>

namespace tdgfn {

// Bad or inconsistent configuration / input files. CLI exit code 2.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Non-finite value surfaced from a training step. CLI exit code 3.
struct NumericFault : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Pruning removed every terminal reachable from the root. CLI exit code 4.
struct DegeneratePruning : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Grid too large to enumerate.
struct CapacityError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Caller violated a documented precondition.
struct ContractViolation : std::logic_error {
  using std::logic_error::logic_error;
};

}  // namespace tdgfn
