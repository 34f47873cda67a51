#pragma once

#include <stdexcept>
#include <string>

namespace tangle {

// Density-matrix file could not be parsed or violates matrix invariants.
struct FileFormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The optimizer never visited a decomposition with residual below the
// feasibility threshold (kappa too low, np too small, or invalid target).
struct NoFeasiblePoint : std::runtime_error {
  using std::runtime_error::runtime_error;
};

} // namespace tangle
