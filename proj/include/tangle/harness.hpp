#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "tangle/ptmc.hpp"
#include "tangle/scenario.hpp"

namespace tangle {

// Full provenance of one minimization.
struct RunRecord {
  ScenarioSpec scenario;
  EngineConfig config;       // as run (np resolved)
  uint64_t seed = 0;         // effective engine seed
  double tau3 = 0.0;
  double r2 = 0.0;
  int np_used = 0;
  double wall_time_s = 0.0;
  std::vector<double> ladder_betas;
  std::vector<double> exchange_rates;
  bool tuner_converged = true;
  std::vector<double> energy_trace; // subsampled, <= 256 points
  std::string status = "ok";        // "ok" or an error tag

  std::string to_json() const;
  static RunRecord from_json(const std::string& text);
};

// Derives independent per-point seeds from a base seed.
uint64_t derive_seed(uint64_t base, uint64_t index);

// Runs one scenario point. config.np <= 0 requests auto mode: start at
// max(4, rank), increase by 4 until successive results differ by < 1e-3,
// capped at 20. Propagates NoFeasiblePoint / FileFormatError /
// invalid_argument.
RunRecord run_point(const ScenarioSpec& spec, const EngineConfig& config);

// One run_point per grid value with independent derived seeds. Failed points
// become records with an error status; the sweep continues.
std::vector<RunRecord> sweep_p(const ScenarioSpec& tmpl,
                               const std::vector<double>& p_grid,
                               const EngineConfig& config);

struct NpSweepResult {
  std::vector<RunRecord> records;
  std::vector<double> delta_tau3; // tau3(np) - min over the list
};

// Fixed-np runs across np_list (each np must be >= rank of the target).
NpSweepResult sweep_np(const ScenarioSpec& spec, const std::vector<int>& np_list,
                       const EngineConfig& config);

struct CsaComparison {
  std::vector<double> pt_tau3;    // per seed; NaN marks an infeasible run
  std::vector<double> csa_tau3;
  double pt_median = 0.0;
  double csa_median = 0.0;
  double pt_median_error = 0.0;   // vs reference_tau3 when given, else NaN
  double csa_median_error = 0.0;
  int pt_feasible = 0;
  int csa_feasible = 0;
  double reference_tau3 = 0.0;
  bool has_reference = false;

  std::string to_json() const;
  std::string to_text() const;
};

// Matched-budget replica-exchange vs simulated-annealing comparison over
// n_seeds derived seeds. n_seeds < 3 is rejected. reference_tau3 = NaN means
// no analytical reference.
CsaComparison compare_csa(const ScenarioSpec& spec, const EngineConfig& config,
                          int n_seeds, double reference_tau3);

// CSV emission (fixed columns, one row per record).
std::string csv_header();
std::string csv_row(const RunRecord& rec);

// Writes a record file named after scenario/np/seed into out_dir.
// Returns the path.
std::string persist_record(const RunRecord& rec, const std::string& out_dir);

} // namespace tangle
