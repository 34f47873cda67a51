#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <complex>
#include <vector>

#include "tangle/errors.hpp"
#include "tangle/ptmc.hpp"

using namespace tangle;

namespace {

Ladder small_ladder(std::vector<double> betas, double c = 0.7) {
  Ladder lad;
  lad.betas = std::move(betas);
  lad.t_max = 1.0 / lad.betas.front();
  lad.t_min = 1.0 / lad.betas.back();
  lad.c = c;
  return lad;
}

Replica make_replica(const Decomposition& dec, const EnergyParams& params,
                     double beta, double step, uint64_t seed) {
  return Replica(dec, energy(dec, params), beta, step, Rng(seed));
}

EnergyParams ghzw_params(double p, double kappa = 1e6) {
  EnergyParams params;
  params.kappa = kappa;
  params.target = make_density({.family = Family::GhzW, .p = p});
  return params;
}

} // namespace

TEST_CASE("geometric ladder has pinned endpoints and strict monotonicity") {
  const Ladder lad = Ladder::geometric(64, 100.0, 1e-6);
  CHECK(lad.betas.front() == 1.0 / 100.0);
  CHECK(lad.betas.back() == 1.0 / 1e-6);
  for (int i = 1; i < lad.size(); ++i) CHECK(lad.betas[i] > lad.betas[i - 1]);
  CHECK_THROWS_AS(Ladder::geometric(1, 100.0, 1e-6), std::invalid_argument);
  CHECK_THROWS_AS(Ladder::geometric(8, 1e-6, 100.0), std::invalid_argument);
}

TEST_CASE("uniform exchange rates are a fixed point of the ladder update") {
  Rng rng(31);
  for (double rate : {0.1, 0.2, 0.5, 0.9}) {
    const Ladder lad = Ladder::geometric(32, 100.0, 1e-6);
    const std::vector<double> rates(31, rate);
    const Ladder next = update_ladder(lad, rates);
    for (int i = 0; i < lad.size(); ++i) {
      const double rel = std::abs(next.betas[i] - lad.betas[i]) /
                         std::max(1.0, std::abs(lad.betas[i]));
      CHECK(rel <= 1e-12);
    }
  }
}

TEST_CASE("ladder update matches hand-evaluated four-replica recursions") {
  // rates (0.5, 0, 0.5): a = (1.5, 0, 1.5), gap factors (1.35, 0.3, 1.35)
  const Ladder lad = small_ladder({1.0, 2.0, 3.0, 4.0});
  const Ladder a = update_ladder(lad, std::vector<double>{0.5, 0.0, 0.5});
  CHECK(a.betas[0] == 1.0);
  CHECK(a.betas[1] == doctest::Approx(2.35).epsilon(1e-12));
  CHECK(a.betas[2] == doctest::Approx(2.65).epsilon(1e-12));
  CHECK(a.betas[3] == 4.0);
  // the dead pair's gap shrank relative to its neighbors
  CHECK(a.betas[2] - a.betas[1] < a.betas[1] - a.betas[0]);

  // rates (0.2, 0.4, 0.6): a = (0.5, 1.0, 1.5), gap factors (0.65, 1.0, 1.35)
  const Ladder b = update_ladder(lad, std::vector<double>{0.2, 0.4, 0.6});
  CHECK(b.betas[1] == doctest::Approx(1.65).epsilon(1e-12));
  CHECK(b.betas[2] == doctest::Approx(2.65).epsilon(1e-12));
}

TEST_CASE("ladder update degenerate cases") {
  const Ladder lad = small_ladder({1.0, 2.0, 3.0, 4.0});

  // c = 0 leaves the gaps untouched whatever the rates
  Ladder c0 = lad;
  c0.c = 0.0;
  const Ladder u0 = update_ladder(c0, std::vector<double>{0.9, 0.05, 0.3});
  for (int i = 0; i < 4; ++i)
    CHECK(u0.betas[i] == doctest::Approx(lad.betas[i]).epsilon(1e-13));

  // all-zero rates carry no signal
  const Ladder uz = update_ladder(lad, std::vector<double>{0.0, 0.0, 0.0});
  for (int i = 0; i < 4; ++i) CHECK(uz.betas[i] == lad.betas[i]);

  CHECK_THROWS_AS(update_ladder(lad, std::vector<double>{0.5, 0.5}),
                  std::invalid_argument);
  CHECK_THROWS_AS(update_ladder(lad, std::vector<double>{0.5, 0.5, 1.5}),
                  std::invalid_argument);

  ExchangeStats stats(3);
  CHECK_THROWS_AS(update_ladder(lad, stats), std::invalid_argument); // 0 attempts
}

TEST_CASE("ladder update preserves endpoints and monotonicity on random input") {
  Rng rng(32);
  for (int trial = 0; trial < 1000; ++trial) {
    const int m = 3 + rng.below(30);
    std::vector<double> betas(m);
    double b = 0.01 * (1.0 + rng.u01());
    for (int i = 0; i < m; ++i) {
      betas[i] = b;
      b *= 1.0 + 3.0 * rng.u01();
    }
    const Ladder lad = small_ladder(betas, 0.05 + 0.9 * rng.u01());
    std::vector<double> rates(m - 1);
    for (auto& r : rates) r = rng.u01() < 0.2 ? 0.0 : rng.u01();
    const Ladder next = update_ladder(lad, rates);
    CHECK(next.betas.front() == lad.betas.front());
    CHECK(next.betas.back() == lad.betas.back());
    for (int i = 1; i < m; ++i) CHECK(next.betas[i] > next.betas[i - 1]);
  }
}

TEST_CASE("exchange attempt follows the acceptance rule and swaps payloads") {
  const EnergyParams params = ghzw_params(0.5);
  Rng dec_rng(33);
  const Decomposition d1 = random_decomposition(4, dec_rng);
  const Decomposition d2 = random_decomposition(4, dec_rng);

  // negative exchange exponent: always swap
  {
    Replica lo = make_replica(d1, params, 0.5, 0.01, 1);
    Replica hi = make_replica(d2, params, 1.0, 0.01, 2);
    lo.energy = 1.0;
    hi.energy = 2.0;
    ExchangeStats stats(1);
    Rng xrng(7);
    CHECK(attempt_exchange(lo, hi, xrng, stats, 0));
    CHECK(lo.energy == 2.0);
    CHECK(hi.energy == 1.0);
    CHECK(stats.accepts[0] == 1);
    for (int k = 0; k < 8; ++k) CHECK(lo.dec.states[0].c[k] == d2.states[0].c[k]);
  }

  // equal energies: exponent is zero, still always accepted
  {
    Replica lo = make_replica(d1, params, 0.5, 0.01, 1);
    Replica hi = make_replica(d2, params, 1.0, 0.01, 2);
    lo.energy = hi.energy = 3.25;
    ExchangeStats stats(1);
    Rng xrng(8);
    CHECK(attempt_exchange(lo, hi, xrng, stats, 0));
  }

  // positive exponent: acceptance frequency matches exp(-1/2)
  {
    ExchangeStats stats(1);
    Rng xrng(9);
    int accepted = 0;
    const int trials = 40000;
    for (int t = 0; t < trials; ++t) {
      Replica lo = make_replica(d1, params, 0.5, 0.01, 1);
      Replica hi = make_replica(d2, params, 1.0, 0.01, 2);
      lo.energy = 2.0;
      hi.energy = 1.0;
      if (attempt_exchange(lo, hi, xrng, stats, 0)) ++accepted;
    }
    const double rate = static_cast<double>(accepted) / trials;
    CHECK(rate == doctest::Approx(std::exp(-0.5)).epsilon(0.02));
    CHECK(stats.attempts[0] == trials);
  }
}

TEST_CASE("proposals keep decompositions valid and are seed-deterministic") {
  const EnergyParams params = ghzw_params(0.3);
  Rng dec_rng(34);
  const Decomposition start = random_decomposition(4, dec_rng);

  Replica rep = make_replica(start, params, 1.0, 0.05, 99);
  Replica rep2 = make_replica(start, params, 1.0, 0.05, 99);
  int produced = 0;
  for (int t = 0; t < 1000; ++t) {
    auto cand = propose_move(rep);
    auto cand2 = propose_move(rep2);
    CHECK(cand.has_value() == cand2.has_value());
    if (!cand) continue;
    ++produced;
    CHECK_NOTHROW(check_decomposition(*cand));
    for (int i = 0; i < 4; ++i) {
      CHECK(cand->weights[i] == cand2->weights[i]);
      for (int k = 0; k < 8; ++k)
        CHECK(cand->states[i].c[k] == cand2->states[i].c[k]);
    }
  }
  CHECK(produced > 900);
}

TEST_CASE("proposal mix is 45/45/10 and zero step freezes jitter moves") {
  const EnergyParams params = ghzw_params(0.3);
  Rng dec_rng(35);
  const Decomposition start = random_decomposition(4, dec_rng);

  Replica rep = make_replica(start, params, 1.0, 1e-3, 123);
  int weight_moves = 0, amp_moves = 0, reset_moves = 0;
  const int trials = 3000;
  for (int t = 0; t < trials; ++t) {
    auto cand = propose_move(rep);
    if (!cand) continue;
    bool weights_changed = false;
    for (int i = 0; i < 4; ++i)
      if (cand->weights[i] != rep.dec.weights[i]) weights_changed = true;
    if (weights_changed) {
      ++weight_moves;
      continue;
    }
    for (int i = 0; i < 4; ++i) {
      std::complex<double> overlap = 0.0;
      bool changed = false;
      for (int k = 0; k < 8; ++k) {
        if (cand->states[i].c[k] != rep.dec.states[i].c[k]) changed = true;
        overlap += std::conj(cand->states[i].c[k]) * rep.dec.states[i].c[k];
      }
      if (changed) {
        if (std::abs(overlap) > 0.9)
          ++amp_moves;
        else
          ++reset_moves;
      }
    }
  }
  CHECK(weight_moves > trials * 0.45 - 150);
  CHECK(weight_moves < trials * 0.45 + 150);
  CHECK(amp_moves > trials * 0.45 - 150);
  CHECK(amp_moves < trials * 0.45 + 150);
  CHECK(reset_moves > trials * 0.10 - 100);
  CHECK(reset_moves < trials * 0.10 + 100);

  // zero step: jitter moves reproduce the current point
  Replica frozen = make_replica(start, params, 1.0, 0.0, 321);
  int near = 0, total = 0;
  for (int t = 0; t < 1000; ++t) {
    auto cand = propose_move(frozen);
    if (!cand) continue;
    ++total;
    double max_diff = 0.0;
    for (int i = 0; i < 4; ++i) {
      max_diff = std::max(max_diff,
                          std::abs(cand->weights[i] - frozen.dec.weights[i]));
      for (int k = 0; k < 8; ++k)
        max_diff = std::max(
            max_diff, std::abs(cand->states[i].c[k] - frozen.dec.states[i].c[k]));
    }
    if (max_diff < 1e-15) ++near;
  }
  // everything except the ~10% replacement moves is an exact no-op
  CHECK(near > total - 160);
}

TEST_CASE("metropolis at infinite temperature accepts every valid proposal") {
  const EnergyParams params = ghzw_params(0.3, 1e4);
  Rng dec_rng(36);
  Replica rep = make_replica(random_decomposition(4, dec_rng), params, 0.0, 0.2, 77);
  int accepted = 0;
  const int trials = 500;
  for (int t = 0; t < trials; ++t)
    if (metropolis_step(rep, params)) ++accepted;
  CHECK(accepted > trials * 0.9); // only degenerate proposals may fail
  CHECK(rep.energy == doctest::Approx(energy(rep.dec, params)).epsilon(1e-10));

  // downhill moves are always accepted: energy never increases at beta -> inf
  Replica cold = make_replica(random_decomposition(4, dec_rng), params, 1e12, 0.05, 78);
  double prev = cold.energy;
  for (int t = 0; t < 500; ++t) {
    metropolis_step(cold, params);
    CHECK(cold.energy <= prev + 1e-9);
    prev = cold.energy;
  }
}

TEST_CASE("minimize recovers the pure-state roof of a rank-1 target") {
  EngineConfig cfg;
  cfg.replicas = 16;
  cfg.sweeps = 2000;
  cfg.np = 3;
  cfg.tune_iterations = 5;
  cfg.tune_sweeps = 20;
  cfg.seed = 5;
  cfg.workers = 1;

  EnergyParams params;
  params.kappa = 1e6;
  params.target = pure_projector(make_pure(Ghz{}));

  const RoofResult res = minimize(cfg, params);
  CHECK(res.r2 < 1e-10);
  CHECK(std::abs(res.tau3 - 1.0) < 1e-3);
  CHECK(res.np == 3);
  CHECK_NOTHROW(check_decomposition(res.best_dec));
  CHECK(average_tangle(res.best_dec) == doctest::Approx(res.tau3).epsilon(1e-12));
  CHECK(residual_r2(res.best_dec, params.target) ==
        doctest::Approx(res.r2).epsilon(1e-6));
  CHECK(res.energy_trace.size() == static_cast<size_t>(cfg.sweeps));
  CHECK(res.exchange_rates.size() == static_cast<size_t>(cfg.replicas - 1));
}

TEST_CASE("minimize stays below the defining decomposition") {
  EngineConfig cfg;
  cfg.replicas = 16;
  cfg.sweeps = 3000;
  cfg.np = 4;
  cfg.tune_iterations = 5;
  cfg.tune_sweeps = 20;
  cfg.seed = 6;
  cfg.workers = 1;

  const EnergyParams params = ghzw_params(0.5);
  const RoofResult res = minimize(cfg, params);
  CHECK(res.r2 < 1e-10);
  CHECK(res.tau3 <= 0.5 + 1e-6); // defining mixture averages to 0.5
}

TEST_CASE("minimize is bitwise deterministic for any worker count") {
  EngineConfig cfg;
  cfg.replicas = 8;
  cfg.sweeps = 300;
  cfg.np = 4;
  cfg.tune_iterations = 3;
  cfg.tune_sweeps = 10;
  cfg.seed = 44;

  const EnergyParams params = ghzw_params(0.8);

  cfg.workers = 1;
  const RoofResult a = minimize(cfg, params);
  cfg.workers = 3;
  const RoofResult b = minimize(cfg, params);
  cfg.workers = 8;
  const RoofResult c = minimize(cfg, params);

  CHECK(a.tau3 == b.tau3);
  CHECK(a.r2 == b.r2);
  CHECK(a.tau3 == c.tau3);
  CHECK(a.r2 == c.r2);
  CHECK(a.energy_trace == b.energy_trace);
  CHECK(a.exchange_rates == b.exchange_rates);
}

TEST_CASE("exchange rounds preserve the replica energy multiset") {
  EngineConfig cfg;
  cfg.replicas = 12;
  cfg.sweeps = 120;
  cfg.np = 4;
  cfg.tune_iterations = 2;
  cfg.tune_sweeps = 10;
  cfg.seed = 45;
  cfg.workers = 2;
  cfg.check_exchange_conservation = true; // throws on any bookkeeping slip

  CHECK_NOTHROW(minimize(cfg, ghzw_params(0.5)));
}

TEST_CASE("minimize rejects partition counts below the target rank") {
  EngineConfig cfg;
  cfg.replicas = 4;
  cfg.sweeps = 10;
  cfg.np = 2;
  cfg.tune_iterations = 0;
  cfg.seed = 1;

  EnergyParams params;
  params.kappa = 1e6;
  params.target = make_density({.family = Family::GhzWFlipW, .p = 0.8, .n = 2.0});
  CHECK_THROWS_AS(minimize(cfg, params), std::invalid_argument);
}

TEST_CASE("minimize reports no-feasible-point on hopeless budgets") {
  EngineConfig cfg;
  cfg.replicas = 2;
  cfg.sweeps = 2;
  cfg.np = 4;
  cfg.tune_iterations = 0;
  cfg.seed = 2;
  cfg.workers = 1;

  CHECK_THROWS_AS(minimize(cfg, ghzw_params(0.5)), NoFeasiblePoint);
}

TEST_CASE("tuning with zero iterations keeps the geometric ladder") {
  EngineConfig cfg;
  cfg.replicas = 8;
  cfg.np = 4;
  cfg.tune_iterations = 0;
  cfg.seed = 3;
  cfg.workers = 1;

  const TuneReport report = tune_ladder(cfg, ghzw_params(0.5));
  const Ladder ref = Ladder::geometric(8, cfg.t_max, cfg.t_min, cfg.ladder_c);
  CHECK(report.ladder.betas == ref.betas);
  CHECK(report.converged);
}

TEST_CASE("tuning drives exchange rates into a workable window") {
  EngineConfig cfg;
  cfg.replicas = 24;
  cfg.np = 4;
  cfg.tune_iterations = 15;
  cfg.tune_sweeps = 40;
  cfg.seed = 4;
  cfg.workers = 2;
  cfg.t_min = 1e-4; // short pilot, moderate range

  const TuneReport report = tune_ladder(cfg, ghzw_params(0.8));
  double lo = 1.0, hi = 0.0;
  for (double r : report.pair_rates) {
    lo = std::min(lo, r);
    hi = std::max(hi, r);
  }
  CHECK(lo > 0.02);
  CHECK(hi < 0.90);
}

TEST_CASE("simulated annealing baseline is deterministic and feasible") {
  EngineConfig cfg;
  cfg.replicas = 4; // budget multiplier for the matched single chain
  cfg.sweeps = 2000;
  cfg.np = 3;
  cfg.tune_iterations = 0;
  cfg.seed = 77;

  EnergyParams params;
  params.kappa = 1e6;
  params.target = pure_projector(make_pure(Ghz{}));

  const RoofResult a = csa_minimize(cfg, params);
  const RoofResult b = csa_minimize(cfg, params);
  CHECK(a.tau3 == b.tau3);
  CHECK(a.r2 == b.r2);
  CHECK(a.r2 < 1e-10);
  CHECK(a.tau3 < 1.1);

  // t_max = t_min degenerates to fixed-temperature sampling and still runs
  EngineConfig flat = cfg;
  flat.t_max = flat.t_min = 1e-4;
  flat.sweeps = 1500;
  CHECK_NOTHROW(csa_minimize(flat, params));
}
