#pragma once

#include <stdexcept>
#include <string>

namespace susp {

// Invalid configuration or road/agent specification.
class SpecError : public std::runtime_error {
 public:
  explicit SpecError(const std::string& what) : std::runtime_error(what) {}
};

// Simulation state left the sane region (|component| > 1e6 or non-finite).
class NumericalDivergence : public std::runtime_error {
 public:
  explicit NumericalDivergence(const std::string& what)
      : std::runtime_error(what) {}
};

// Replay buffer cannot serve the requested batch.
class InsufficientData : public std::runtime_error {
 public:
  explicit InsufficientData(const std::string& what)
      : std::runtime_error(what) {}
};

// Network architectures or tensor shapes do not line up.
class ShapeMismatch : public std::runtime_error {
 public:
  explicit ShapeMismatch(const std::string& what)
      : std::runtime_error(what) {}
};

}  // namespace susp
