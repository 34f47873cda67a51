#pragma once

#include <vector>

#include "tangle/qstate.hpp"
#include "tangle/rng.hpp"
#include "tangle/types.hpp"

namespace tangle {

// A pure-state ensemble {p_i, |psi_i>} realizing (or approximating) a target
// density matrix. Weights are nonnegative and sum to 1; member states are
// unit normalized.
struct Decomposition {
  std::vector<double> weights;
  std::vector<PureState> states;

  int np() const { return static_cast<int>(weights.size()); }
};

// Throws std::invalid_argument when a Decomposition invariant is violated
// (size mismatch, negative weight, weight sum or state norm off by > 1e-12).
void check_decomposition(const Decomposition& dec);

struct EnergyParams {
  double kappa = 1e6; // penalty weight, sensible range 1e4..1e7 (up to 1e12)
  DensityMatrix target;
};

// sum_i p_i |psi_i><psi_i|.
DensityMatrix realized_density(const Decomposition& dec);

// sum_ab |sum_i p_i c_ia conj(c_ib) - rho_ab|^2 over all 64 entries.
double residual_r2(const Decomposition& dec, const DensityMatrix& target);

// sum_i p_i tau3(psi_i).
double average_tangle(const Decomposition& dec);

// average_tangle + kappa * residual_r2, exactly that sum.
double energy(const Decomposition& dec, const EnergyParams& params);

// Rescales states to unit norm and weights to unit sum. Idempotent: inputs
// already within a few ulp of normalized are returned unchanged bitwise.
// Throws std::invalid_argument when all weights are zero or any state has
// zero norm (degenerate proposal, to be rejected by the caller).
Decomposition normalize(Decomposition dec);

// Weights uniform on the simplex (exponential draws, normalized); each state
// has 16 standard-normal real components, normalized. Deterministic in rng.
Decomposition random_decomposition(int np, Rng& rng);

} // namespace tangle
