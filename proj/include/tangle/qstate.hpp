#pragma once

#include <array>
#include <string>
#include <variant>

#include "tangle/scenario.hpp"
#include "tangle/types.hpp"

namespace tangle {

// Named pure-state families.
struct Ghz {};
struct W {};
struct FlippedW {};
struct GeneralizedGhz {
  double a = 0.0, b = 0.0; // a|000> + b|111>, a^2 + b^2 = 1
};
struct GeneralizedW {
  double c = 0.0, d = 0.0, f = 0.0; // c|001> + d|010> + f|100>
};
struct RawState {
  std::array<Amp, kBasisDim> coeffs{};
};

using StateFamily =
    std::variant<Ghz, W, FlippedW, GeneralizedGhz, GeneralizedW, RawState>;

// Builds the normalized pure state of a family. Rejects parameter vectors
// whose norm deviates from 1 by more than 1e-6, and NaN parameters.
PureState make_pure(const StateFamily& family);

// tau3 of a normalized three-qubit pure state, in [0, 1].
double three_tangle_pure(const PureState& psi);

// Pure-state concurrence 2|c00 c11 - c01 c10| of a normalized 2-qubit state.
double concurrence_pure(const TwoQubitState& psi);

// |psi><psi|.
DensityMatrix pure_projector(const PureState& psi);

// Builds the density matrix of a scenario. Throws std::invalid_argument on
// out-of-range parameters or negative mixture weights, FileFormatError for
// FromFile problems.
DensityMatrix make_density(const ScenarioSpec& spec);

// Never fails; reports Hermiticity/trace/PSD deviations and the rank
// (eigenvalue count above kRankEps).
DensityDiagnostics validate_density(const DensityMatrix& rho);

// Line-oriented density-matrix file: first non-comment line is the dimension
// (must be 8), then exactly 64 lines "row col re im" with 0-based indices.
// '#' starts a comment. Throws FileFormatError on parse or invariant
// violations, naming the invariant and the deviation.
DensityMatrix load_density_file(const std::string& path);
void write_density_file(const std::string& path, const DensityMatrix& rho);

} // namespace tangle
