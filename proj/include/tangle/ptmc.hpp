#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "tangle/roof.hpp"
#include "tangle/rng.hpp"

namespace tangle {

// Inverse-temperature ladder. betas are strictly increasing with both
// endpoints pinned: betas.front() = 1/t_max, betas.back() = 1/t_min.
struct Ladder {
  std::vector<double> betas;
  double t_max = 100.0;
  double t_min = 1e-6;
  double c = 0.7; // recursion damping, 0 < c < 1

  int size() const { return static_cast<int>(betas.size()); }

  // Geometric in temperature between t_max and t_min.
  static Ladder geometric(int replicas, double t_max, double t_min,
                          double c = 0.7);
};

// Per-adjacent-pair exchange counters; pair k sits between betas[k] and
// betas[k+1].
struct ExchangeStats {
  std::vector<int64_t> attempts;
  std::vector<int64_t> accepts;

  explicit ExchangeStats(int pairs = 0) : attempts(pairs, 0), accepts(pairs, 0) {}
  int pairs() const { return static_cast<int>(attempts.size()); }
  double rate(int k) const {
    return attempts[k] > 0 ? static_cast<double>(accepts[k]) / attempts[k] : 0.0;
  }
  std::vector<double> rates() const;
  void reset();
};

// One recursion step of the acceptance-rate-driven ladder adaptation.
// Endpoints stay fixed, gaps stay positive, uniform rates are a fixed point.
Ladder update_ladder(const Ladder& ladder, std::span<const double> pair_rates);
Ladder update_ladder(const Ladder& ladder, const ExchangeStats& stats);

struct EngineConfig {
  double t_max = 100.0;
  double t_min = 1e-6;
  double ladder_c = 0.7;
  int replicas = 64;
  int64_t sweeps = 200000;   // production sweeps; one sweep = n_vars moves/replica
  int exchange_period = 1;   // sweeps between exchange rounds
  double kappa = 1e6;
  int np = 4;
  uint64_t seed = 0;
  int tune_iterations = 30;  // ladder/step adaptation rounds
  int tune_sweeps = 50;      // pilot sweeps per adaptation round
  double residual_threshold = 1e-10;
  double step_accept_target = 0.40; // within-replica acceptance targeted in tuning
  int workers = 0;           // replica-advancing threads; 0 = hardware count
  bool check_exchange_conservation = false; // debug: verify swap bookkeeping

  // Moves per replica per sweep: np weights + 16 reals per state.
  int64_t n_vars() const { return static_cast<int64_t>(np) + 16LL * np; }

  void validate() const; // throws std::invalid_argument
};

struct RoofResult {
  double tau3 = 0.0; // smallest average tangle among feasible visited decs
  double r2 = 0.0;   // its residual (recomputed from best_dec)
  Decomposition best_dec;
  std::vector<double> energy_trace;    // per-sweep minimum energy over replicas
  std::vector<double> exchange_rates;  // production-phase per-pair rates
  std::vector<double> ladder_betas;    // frozen ladder used in production
  std::vector<double> step_scales;     // frozen per-replica move amplitudes
  bool tuner_converged = true;
  int np = 0;
  int64_t feasible_replicas = 0; // replica streams that visited a feasible dec
};

struct TuneReport {
  Ladder ladder;
  std::vector<double> pair_rates; // last adaptation round
  std::vector<double> step_scales;
  bool converged = true;
  double max_last_rel_change = 0.0;
};

// --- Single-replica building blocks (unit-testable spec surface) ---------

struct Replica {
  Decomposition dec;
  double energy = 0.0;      // cached; equals tangle::energy(dec, params)
  double beta = 0.0;
  double step_scale = 0.05; // jitter amplitude for coordinate moves
  double rot_scale = 0.7;   // angle scale for member-pair rotations
  Rng rng;

  Replica(Decomposition d, double e, double b, double step, Rng r)
      : dec(std::move(d)), energy(e), beta(b), step_scale(step), rng(std::move(r)) {}
};

// Draws one move and returns the candidate, or nullopt when the proposal is
// degenerate (negative weight, zero norm) and counts as rejected. Move mix:
// 35% amplitude jitter, 35% weight jitter, 10% full state replacement, and
// 20% pair rotation. A pair rotation mixes two members i, j by a 2x2 unitary
// acting on (sqrt(w_i) psi_i, sqrt(w_j) psi_j); it walks along the manifold
// of decompositions realizing the same density matrix, leaving the residual
// unchanged up to rounding while the average tangle moves.
std::optional<Decomposition> propose_move(Replica& rep);

// One Metropolis update at rep.beta; returns true when the candidate was
// accepted (cached energy and configuration updated).
bool metropolis_step(Replica& rep, const EnergyParams& params);

// Exchange attempt between adjacent replicas; on acceptance the
// configurations (dec + cached energy) swap between the temperature slots.
// Uses `xrng` for the acceptance draw and updates `stats` at `pair`.
bool attempt_exchange(Replica& lo, Replica& hi, Rng& xrng, ExchangeStats& stats,
                      int pair);

// --- Full optimizers ------------------------------------------------------

// Replica-exchange minimization of average tangle + kappa * residual.
// Deterministic in (config, params) for any worker count. Throws
// NoFeasiblePoint when no visited decomposition reaches the residual
// threshold, std::invalid_argument when config.np < rank(target).
RoofResult minimize(const EngineConfig& config, const EnergyParams& params);

// Ladder diagnostics only: runs the adaptation phase and reports the frozen
// ladder without a production run.
TuneReport tune_ladder(const EngineConfig& config, const EnergyParams& params);

// Single-chain simulated-annealing baseline with geometric cooling over the
// same total move budget as minimize (tuning included), same move kernel,
// same feasibility accounting.
RoofResult csa_minimize(const EngineConfig& config, const EnergyParams& params);

} // namespace tangle
