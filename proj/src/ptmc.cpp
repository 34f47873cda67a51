#include "tangle/ptmc.hpp"
#include <cmath>

#include <algorithm>
#include <barrier>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <memory>
#include <stdexcept>
#include <thread>
#include <vector>

#include "tangle/errors.hpp"
#include "tangle/kernels.hpp"
#include "tangle/qstate.hpp"

namespace tangle {

// ---------------------------------------------------------------------------
// Ladder
// ---------------------------------------------------------------------------

Ladder Ladder::geometric(int replicas, double t_max, double t_min, double c) {
  if (replicas < 2) throw std::invalid_argument("ladder needs at least 2 replicas");
  if (!(t_min > 0.0) || !(t_max >= t_min))
    throw std::invalid_argument("need t_max >= t_min > 0");
  if (!(c > 0.0) || !(c < 1.0)) throw std::invalid_argument("need 0 < c < 1");
  Ladder lad;
  lad.t_max = t_max;
  lad.t_min = t_min;
  lad.c = c;
  lad.betas.resize(replicas);
  const double step = std::log(t_min / t_max) / (replicas - 1);
  for (int m = 0; m < replicas; ++m)
    lad.betas[m] = 1.0 / (t_max * std::exp(step * m));
  lad.betas.front() = 1.0 / t_max;
  lad.betas.back() = 1.0 / t_min;
  return lad;
}

std::vector<double> ExchangeStats::rates() const {
  std::vector<double> out(attempts.size());
  for (int k = 0; k < pairs(); ++k) out[k] = rate(k);
  return out;
}

void ExchangeStats::reset() {
  std::fill(attempts.begin(), attempts.end(), 0);
  std::fill(accepts.begin(), accepts.end(), 0);
}

Ladder update_ladder(const Ladder& ladder, std::span<const double> pair_rates) {
  const int m = ladder.size();
  if (static_cast<int>(pair_rates.size()) != m - 1)
    throw std::invalid_argument("need one exchange rate per adjacent pair");
  for (double r : pair_rates)
    if (!(r >= 0.0) || !(r <= 1.0))
      throw std::invalid_argument("exchange rates must lie in [0, 1]");

  const auto& b = ladder.betas;
  double denom = 0.0;
  for (int k = 0; k < m - 1; ++k) denom += pair_rates[k] * (b[k + 1] - b[k]);
  // No accepted exchange anywhere: the rates carry no spacing signal.
  if (!(denom > 0.0)) return ladder;

  const double span = b[m - 1] - b[0];
  Ladder out = ladder;
  out.betas[0] = b[0];
  for (int k = 0; k < m - 1; ++k) {
    const double a = pair_rates[k] * span / denom;
    const double factor = 1.0 - ladder.c + ladder.c * a; // >= 1-c > 0
    out.betas[k + 1] = out.betas[k] + factor * (b[k + 1] - b[k]);
  }
  // The normalization of `a` already preserves the top endpoint up to
  // rounding; rescale the gaps so both endpoints stay pinned bitwise.
  const double scale = span / (out.betas[m - 1] - out.betas[0]);
  for (int k = 1; k < m - 1; ++k)
    out.betas[k] = b[0] + (out.betas[k] - b[0]) * scale;
  out.betas[m - 1] = b[m - 1];
  return out;
}

Ladder update_ladder(const Ladder& ladder, const ExchangeStats& stats) {
  if (stats.pairs() != ladder.size() - 1)
    throw std::invalid_argument("exchange stats do not match ladder size");
  for (int k = 0; k < stats.pairs(); ++k)
    if (stats.attempts[k] < 1)
      throw std::invalid_argument("every adjacent pair needs at least one attempt");
  return update_ladder(ladder, stats.rates());
}

// ---------------------------------------------------------------------------
// EngineConfig
// ---------------------------------------------------------------------------

void EngineConfig::validate() const {
  if (!(t_min > 0.0) || !(t_max >= t_min))
    throw std::invalid_argument("need t_max >= t_min > 0");
  if (!(ladder_c > 0.0) || !(ladder_c < 1.0))
    throw std::invalid_argument("need 0 < ladder_c < 1");
  if (replicas < 2) throw std::invalid_argument("need at least 2 replicas");
  if (sweeps < 1) throw std::invalid_argument("need at least 1 sweep");
  if (exchange_period < 1) throw std::invalid_argument("exchange_period must be positive");
  if (!(kappa >= 1e3) || !(kappa <= 1e12))
    throw std::invalid_argument("kappa must lie in [1e3, 1e12]");
  if (np < 1) throw std::invalid_argument("np must be at least 1");
  if (tune_iterations < 0) throw std::invalid_argument("tune_iterations must be >= 0");
  if (tune_sweeps < 1) throw std::invalid_argument("tune_sweeps must be positive");
  if (!(residual_threshold > 0.0))
    throw std::invalid_argument("residual_threshold must be positive");
  if (!(step_accept_target > 0.0) || !(step_accept_target < 1.0))
    throw std::invalid_argument("step_accept_target must lie in (0, 1)");
  if (workers < 0) throw std::invalid_argument("workers must be >= 0");
}

// ---------------------------------------------------------------------------
// Move machinery shared by the public replica ops and the packed engine
// ---------------------------------------------------------------------------

namespace {

constexpr double kMinStateNormSq = 1e-24;
constexpr double kMinWeightSum = 1e-12;
constexpr double kStepScaleMin = 1e-9;
constexpr double kStepScaleMax = 2.0;
constexpr double kRotScaleMin = 1e-8;
constexpr double kRotScaleMax = 3.2;

// Dedicated stream ids, far away from replica indices.
constexpr uint64_t kExchangeStream = 0x45584348ULL << 32; // "EXCH"
constexpr uint64_t kCsaStream = 0x43534100ULL << 32;      // "CSA"

enum class MoveKind { Amplitude, Weight, Reset, Rotate };

struct MoveDraw {
  MoveKind kind;
  int state = 0;
  int partner = 0;           // rotation partner (distinct from state)
  int amp = 0;
  double g1 = 0.0, g2 = 0.0; // amplitude jitter
  double gw = 0.0;           // weight jitter / rotation angle
  double phase = 0.0;        // rotation phase in [0, 2pi)
  std::array<double, 16> fresh; // filled only for Reset moves
};

// Move mix: 35% amplitude jitter, 35% weight jitter, 10% state replacement,
// 20% member-pair rotation.
MoveDraw draw_move(Rng& rng, int np) {
  MoveDraw mv;
  const double u = rng.u01();
  if (u < 0.35) {
    mv.kind = MoveKind::Amplitude;
    mv.state = rng.below(np);
    mv.amp = rng.below(kBasisDim);
    mv.g1 = rng.normal();
    mv.g2 = rng.normal();
  } else if (u < 0.70) {
    mv.kind = MoveKind::Weight;
    mv.state = rng.below(np);
    mv.gw = rng.normal();
  } else if (u < 0.80 || np < 2) {
    mv.kind = MoveKind::Reset;
    mv.state = rng.below(np);
    for (auto& g : mv.fresh) g = rng.normal();
  } else {
    mv.kind = MoveKind::Rotate;
    mv.state = rng.below(np);
    const int other = rng.below(np - 1);
    mv.partner = other >= mv.state ? other + 1 : other;
    mv.gw = rng.normal();
    mv.phase = 2.0 * 3.14159265358979323846 * rng.u01();
  }
  return mv;
}

// Rotates the weighted pair (sqrt(w1) s1, sqrt(w2) s2) by the 2x2 unitary
// [[cos t, e^{i phi} sin t], [-e^{-i phi} sin t, cos t]]; the summed outer
// product (hence the realized density) is invariant. Outputs the rotated
// unit states and their new weights; false when a weight collapses to zero.
bool rotate_pair(double theta, double phi, const double* s1re, const double* s1im,
                 double w1, const double* s2re, const double* s2im, double w2,
                 double* n1re, double* n1im, double* v1, double* n2re,
                 double* n2im, double* v2) {
  const double c = std::cos(theta), s = std::sin(theta);
  const double er = std::cos(phi), ei = std::sin(phi);
  const double a = std::sqrt(w1), b = std::sqrt(w2);
  double nrm1 = 0.0, nrm2 = 0.0;
  for (int k = 0; k < kBasisDim; ++k) {
    const double u1r = a * s1re[k], u1i = a * s1im[k];
    const double u2r = b * s2re[k], u2i = b * s2im[k];
    const double r1 = c * u1r + s * (er * u2r - ei * u2i);
    const double i1 = c * u1i + s * (er * u2i + ei * u2r);
    const double r2 = c * u2r - s * (er * u1r + ei * u1i);
    const double i2 = c * u2i - s * (er * u1i - ei * u1r);
    n1re[k] = r1;
    n1im[k] = i1;
    n2re[k] = r2;
    n2im[k] = i2;
    nrm1 += r1 * r1 + i1 * i1;
    nrm2 += r2 * r2 + i2 * i2;
  }
  if (nrm1 < kMinStateNormSq || nrm2 < kMinStateNormSq) return false;
  *v1 = nrm1;
  *v2 = nrm2;
  const double inv1 = 1.0 / std::sqrt(nrm1);
  const double inv2 = 1.0 / std::sqrt(nrm2);
  for (int k = 0; k < kBasisDim; ++k) {
    n1re[k] *= inv1;
    n1im[k] *= inv1;
    n2re[k] *= inv2;
    n2im[k] *= inv2;
  }
  return true;
}

// Builds the candidate member state for Amplitude/Reset moves into
// nre/nim (8 + 8 doubles). Returns false when the proposal is degenerate.
bool candidate_state(const MoveDraw& mv, double step, const double* sre,
                     const double* sim, double* nre, double* nim) {
  if (mv.kind == MoveKind::Amplitude) {
    std::memcpy(nre, sre, kBasisDim * sizeof(double));
    std::memcpy(nim, sim, kBasisDim * sizeof(double));
    nre[mv.amp] += step * mv.g1;
    nim[mv.amp] += step * mv.g2;
  } else {
    for (int k = 0; k < kBasisDim; ++k) {
      nre[k] = mv.fresh[2 * k];
      nim[k] = mv.fresh[2 * k + 1];
    }
  }
  double n2 = 0.0;
  for (int k = 0; k < kBasisDim; ++k) n2 += nre[k] * nre[k] + nim[k] * nim[k];
  if (n2 < kMinStateNormSq) return false;
  if (std::abs(n2 - 1.0) > 0x1.0p-48) {
    const double inv = 1.0 / std::sqrt(n2);
    for (int k = 0; k < kBasisDim; ++k) {
      nre[k] *= inv;
      nim[k] *= inv;
    }
  }
  return true;
}

bool metropolis_accept(double delta_e, double beta, Rng& rng) {
  if (delta_e <= 0.0) return true;
  return rng.u01() < std::exp(-beta * delta_e);
}

} // namespace

// ---------------------------------------------------------------------------
// Public single-replica operations
// ---------------------------------------------------------------------------

std::optional<Decomposition> propose_move(Replica& rep) {
  const int np = rep.dec.np();
  const MoveDraw mv = draw_move(rep.rng, np);

  if (mv.kind == MoveKind::Weight) {
    const double dp = rep.step_scale * mv.gw;
    if (rep.dec.weights[mv.state] + dp < 0.0) return std::nullopt;
    if (1.0 + dp < kMinWeightSum) return std::nullopt;
    Decomposition cand = rep.dec;
    const double inv = 1.0 / (1.0 + dp);
    for (int i = 0; i < np; ++i) cand.weights[i] *= inv;
    cand.weights[mv.state] = (rep.dec.weights[mv.state] + dp) * inv;
    return cand;
  }

  if (mv.kind == MoveKind::Rotate) {
    double s1re[kBasisDim], s1im[kBasisDim], s2re[kBasisDim], s2im[kBasisDim];
    double n1re[kBasisDim], n1im[kBasisDim], n2re[kBasisDim], n2im[kBasisDim];
    const auto& s1 = rep.dec.states[mv.state].c;
    const auto& s2 = rep.dec.states[mv.partner].c;
    for (int k = 0; k < kBasisDim; ++k) {
      s1re[k] = s1[k].real();
      s1im[k] = s1[k].imag();
      s2re[k] = s2[k].real();
      s2im[k] = s2[k].imag();
    }
    double v1 = 0.0, v2 = 0.0;
    if (!rotate_pair(rep.rot_scale * mv.gw, mv.phase, s1re, s1im,
                     rep.dec.weights[mv.state], s2re, s2im,
                     rep.dec.weights[mv.partner], n1re, n1im, &v1, n2re, n2im,
                     &v2))
      return std::nullopt;
    Decomposition cand = rep.dec;
    cand.weights[mv.state] = v1;
    cand.weights[mv.partner] = v2;
    for (int k = 0; k < kBasisDim; ++k) {
      cand.states[mv.state].c[k] = Amp(n1re[k], n1im[k]);
      cand.states[mv.partner].c[k] = Amp(n2re[k], n2im[k]);
    }
    return cand;
  }

  double ore[kBasisDim], oim[kBasisDim], nre[kBasisDim], nim[kBasisDim];
  const auto& s = rep.dec.states[mv.state].c;
  for (int k = 0; k < kBasisDim; ++k) {
    ore[k] = s[k].real();
    oim[k] = s[k].imag();
  }
  const double step = mv.kind == MoveKind::Amplitude ? rep.step_scale : 0.0;
  if (!candidate_state(mv, step, ore, oim, nre, nim)) return std::nullopt;
  Decomposition cand = rep.dec;
  for (int k = 0; k < kBasisDim; ++k) cand.states[mv.state].c[k] = Amp(nre[k], nim[k]);
  return cand;
}

bool metropolis_step(Replica& rep, const EnergyParams& params) {
  auto cand = propose_move(rep);
  if (!cand) return false;
  const double e_new = energy(*cand, params);
  if (!metropolis_accept(e_new - rep.energy, rep.beta, rep.rng)) return false;
  rep.dec = std::move(*cand);
  rep.energy = e_new;
  return true;
}

bool attempt_exchange(Replica& lo, Replica& hi, Rng& xrng, ExchangeStats& stats,
                      int pair) {
  stats.attempts[pair] += 1;
  const double dh = -(hi.beta - lo.beta) * (hi.energy - lo.energy);
  const bool accept = dh < 0.0 || xrng.u01() < std::exp(-dh);
  if (accept) {
    std::swap(lo.dec, hi.dec);
    std::swap(lo.energy, hi.energy);
    stats.accepts[pair] += 1;
  }
  return accept;
}

// ---------------------------------------------------------------------------
// Packed engine
// ---------------------------------------------------------------------------

namespace {

// One walker configuration in kernel layout. Configurations are permuted
// among temperature slots by exchanges; slot-owned data (beta, step, rng)
// never moves.
struct PackedConfig {
  int np = 0;
  std::vector<double> w;        // np weights
  std::vector<double> sr, si;   // member states, state i at offset 8*i
  std::vector<double> tau;      // cached per-state tangles
  alignas(32) std::array<double, 64> dre{}, dim{}; // D = realized - target
  double r2 = 0.0;
  double avg = 0.0;

  // best feasible decomposition this walker has visited
  bool has_best = false;
  double best_avg = 0.0;
  double best_r2 = 0.0;
  std::vector<double> best_w, best_sr, best_si;

  double energy(double kappa) const { return avg + kappa * r2; }
};

// Per-channel acceptance counters. The jitter scale is steered by the
// amplitude channel alone: weight moves and rotations can be cost-free on
// degenerate targets (all members on one ray), and folding their acceptance
// into the signal inflates the scale until amplitude moves stop moving.
struct MoveStats {
  int64_t amp_attempts = 0;
  int64_t amp_accepts = 0;
  int64_t wt_attempts = 0;
  int64_t wt_accepts = 0;
  int64_t rot_attempts = 0;
  int64_t rot_accepts = 0;

  void reset() {
    amp_attempts = amp_accepts = 0;
    wt_attempts = wt_accepts = 0;
    rot_attempts = rot_accepts = 0;
  }
};

struct Slot {
  double beta = 0.0;
  double step = 0.05;     // jitter scale
  double rot_step = 0.7;  // rotation angle scale
  Rng rng;
  int config = 0;
  MoveStats stats;

  explicit Slot(Rng r) : rng(r) {}
};

struct TargetSoa {
  alignas(32) std::array<double, 64> re{}, im{};

  explicit TargetSoa(const DensityMatrix& rho) {
    for (int k = 0; k < kDensityEntries; ++k) {
      re[k] = rho.m[k].real();
      im[k] = rho.m[k].imag();
    }
  }
};

void pack_decomposition(const Decomposition& dec, PackedConfig& c) {
  c.np = dec.np();
  c.w.assign(dec.weights.begin(), dec.weights.end());
  c.sr.assign(static_cast<size_t>(c.np) * kBasisDim, 0.0);
  c.si.assign(static_cast<size_t>(c.np) * kBasisDim, 0.0);
  for (int i = 0; i < c.np; ++i)
    for (int k = 0; k < kBasisDim; ++k) {
      c.sr[kBasisDim * i + k] = dec.states[i].c[k].real();
      c.si[kBasisDim * i + k] = dec.states[i].c[k].imag();
    }
  c.tau.assign(c.np, 0.0);
}

Decomposition unpack(const std::vector<double>& w, const std::vector<double>& sr,
                     const std::vector<double>& si) {
  Decomposition dec;
  const int np = static_cast<int>(w.size());
  dec.weights = w;
  dec.states.resize(np);
  for (int i = 0; i < np; ++i)
    for (int k = 0; k < kBasisDim; ++k)
      dec.states[i].c[k] = Amp(sr[kBasisDim * i + k], si[kBasisDim * i + k]);
  return dec;
}

// Recomputes D, r2 and the tangle caches from the raw weights/states,
// renormalizing away incremental-update drift. Called once per exchange
// chunk so cached values track the exact ones to ~1e-13.
void refresh(PackedConfig& c, const TargetSoa& rho, const kernels::KernelTable& kt) {
  double sum = 0.0;
  for (double w : c.w) sum += w;
  if (std::abs(sum - 1.0) > 0x1.0p-48) {
    const double inv = 1.0 / sum;
    for (double& w : c.w) w *= inv;
  }
  for (int i = 0; i < c.np; ++i) {
    double* re = c.sr.data() + kBasisDim * i;
    double* im = c.si.data() + kBasisDim * i;
    double n2 = 0.0;
    for (int k = 0; k < kBasisDim; ++k) n2 += re[k] * re[k] + im[k] * im[k];
    if (std::abs(n2 - 1.0) > 0x1.0p-48) {
      const double inv = 1.0 / std::sqrt(n2);
      for (int k = 0; k < kBasisDim; ++k) {
        re[k] *= inv;
        im[k] *= inv;
      }
    }
  }
  for (int k = 0; k < kDensityEntries; ++k) {
    c.dre[k] = -rho.re[k];
    c.dim[k] = -rho.im[k];
  }
  c.avg = 0.0;
  for (int i = 0; i < c.np; ++i) {
    const double* re = c.sr.data() + kBasisDim * i;
    const double* im = c.si.data() + kBasisDim * i;
    kt.outer_accum(c.dre.data(), c.dim.data(), re, im, c.w[i]);
    c.tau[i] = kt.tangle8(re, im);
    c.avg += c.w[i] * c.tau[i];
  }
  c.r2 = kt.sum_sq(c.dre.data(), c.dim.data());
}

void snapshot_if_best(PackedConfig& c, double threshold) {
  if (c.r2 < threshold && (!c.has_best || c.avg < c.best_avg)) {
    c.has_best = true;
    c.best_avg = c.avg;
    c.best_r2 = c.r2;
    c.best_w = c.w;
    c.best_sr = c.sr;
    c.best_si = c.si;
  }
}

// One Metropolis move on a packed configuration.
bool try_move(PackedConfig& c, Rng& rng, double beta, double step,
              double rot_step, double kappa, double threshold,
              const TargetSoa& rho, const kernels::KernelTable& kt,
              MoveStats& stats) {
  const MoveDraw mv = draw_move(rng, c.np);

  if (mv.kind == MoveKind::Rotate) {
    stats.rot_attempts += 1;
    double n1re[kBasisDim], n1im[kBasisDim], n2re[kBasisDim], n2im[kBasisDim];
    const double* s1re = c.sr.data() + kBasisDim * mv.state;
    const double* s1im = c.si.data() + kBasisDim * mv.state;
    const double* s2re = c.sr.data() + kBasisDim * mv.partner;
    const double* s2im = c.si.data() + kBasisDim * mv.partner;
    const double w1 = c.w[mv.state], w2 = c.w[mv.partner];
    double v1 = 0.0, v2 = 0.0;
    if (!rotate_pair(rot_step * mv.gw, mv.phase, s1re, s1im, w1, s2re, s2im, w2,
                     n1re, n1im, &v1, n2re, n2im, &v2))
      return false;
    const double tau1 = kt.tangle8(n1re, n1im);
    const double tau2 = kt.tangle8(n2re, n2im);
    const double r2_new = kt.pair_move_r2(c.dre.data(), c.dim.data(), s1re, s1im,
                                          w1, s2re, s2im, w2, n1re, n1im, v1,
                                          n2re, n2im, v2);
    const double avg_new = c.avg + (v1 * tau1 + v2 * tau2) -
                           (w1 * c.tau[mv.state] + w2 * c.tau[mv.partner]);
    const double de = (avg_new - c.avg) + kappa * (r2_new - c.r2);
    if (!metropolis_accept(de, beta, rng)) return false;
    kt.pair_move_commit(c.dre.data(), c.dim.data(), s1re, s1im, w1, s2re, s2im,
                        w2, n1re, n1im, v1, n2re, n2im, v2);
    double* d1re = c.sr.data() + kBasisDim * mv.state;
    double* d1im = c.si.data() + kBasisDim * mv.state;
    double* d2re = c.sr.data() + kBasisDim * mv.partner;
    double* d2im = c.si.data() + kBasisDim * mv.partner;
    std::memcpy(d1re, n1re, sizeof n1re);
    std::memcpy(d1im, n1im, sizeof n1im);
    std::memcpy(d2re, n2re, sizeof n2re);
    std::memcpy(d2im, n2im, sizeof n2im);
    c.w[mv.state] = v1;
    c.w[mv.partner] = v2;
    c.tau[mv.state] = tau1;
    c.tau[mv.partner] = tau2;
    c.avg = avg_new;
    c.r2 = r2_new;
    snapshot_if_best(c, threshold);
    stats.rot_accepts += 1;
    return true;
  }

  if (mv.kind == MoveKind::Weight) {
    stats.wt_attempts += 1;
    const double dp = step * mv.gw;
    const double wk = c.w[mv.state];
    if (wk + dp < 0.0) return false;
    if (1.0 + dp < kMinWeightSum) return false;
    const double* sre = c.sr.data() + kBasisDim * mv.state;
    const double* sim = c.si.data() + kBasisDim * mv.state;
    const double r2_new = kt.weight_move_r2(c.dre.data(), c.dim.data(), sre, sim,
                                            rho.re.data(), rho.im.data(), dp);
    const double avg_new = (c.avg + dp * c.tau[mv.state]) / (1.0 + dp);
    const double de = (avg_new - c.avg) + kappa * (r2_new - c.r2);
    if (!metropolis_accept(de, beta, rng)) return false;
    kt.weight_move_commit(c.dre.data(), c.dim.data(), sre, sim, rho.re.data(),
                          rho.im.data(), dp);
    const double inv = 1.0 / (1.0 + dp);
    for (int i = 0; i < c.np; ++i) c.w[i] *= inv;
    c.w[mv.state] = (wk + dp) * inv;
    c.avg = avg_new;
    c.r2 = r2_new;
    snapshot_if_best(c, threshold);
    stats.wt_accepts += 1;
    return true;
  }

  if (mv.kind == MoveKind::Amplitude) stats.amp_attempts += 1;
  double* ore = c.sr.data() + kBasisDim * mv.state;
  double* oim = c.si.data() + kBasisDim * mv.state;
  double nre[kBasisDim], nim[kBasisDim];
  const double jitter = mv.kind == MoveKind::Amplitude ? step : 0.0;
  if (!candidate_state(mv, jitter, ore, oim, nre, nim)) return false;

  const double wk = c.w[mv.state];
  const double tau_new = kt.tangle8(nre, nim);
  const double r2_new = kt.state_move_r2(c.dre.data(), c.dim.data(), ore, oim,
                                         nre, nim, wk);
  const double avg_new = c.avg + wk * (tau_new - c.tau[mv.state]);
  const double de = (avg_new - c.avg) + kappa * (r2_new - c.r2);
  if (!metropolis_accept(de, beta, rng)) return false;
  kt.state_move_commit(c.dre.data(), c.dim.data(), ore, oim, nre, nim, wk);
  std::memcpy(ore, nre, sizeof nre);
  std::memcpy(oim, nim, sizeof nim);
  c.tau[mv.state] = tau_new;
  c.avg = avg_new;
  c.r2 = r2_new;
  snapshot_if_best(c, threshold);
  if (mv.kind == MoveKind::Amplitude) stats.amp_accepts += 1;
  return true;
}

class Engine {
 public:
  Engine(const EngineConfig& cfg, const EnergyParams& params)
      : cfg_(cfg),
        rho_(params.target),
        kt_(kernels::active()),
        xrng_(cfg.seed, kExchangeStream),
        stats_(cfg.replicas - 1) {
    cfg_.validate();
    const DensityDiagnostics diag = validate_density(params.target);
    if (!diag.ok())
      throw std::invalid_argument("target is not a valid density matrix");
    if (cfg_.np < diag.rank)
      throw std::invalid_argument(
          "np = " + std::to_string(cfg_.np) + " is below the target rank " +
          std::to_string(diag.rank) + "; no exact decomposition exists");

    ladder_ = Ladder::geometric(cfg_.replicas, cfg_.t_max, cfg_.t_min, cfg_.ladder_c);

    const int m = cfg_.replicas;
    configs_.resize(m);
    slots_.reserve(m);
    for (int i = 0; i < m; ++i) {
      Slot slot(Rng(cfg_.seed, static_cast<uint64_t>(i)));
      slot.beta = ladder_.betas[i];
      slot.config = i;
      slot.step = init_step(ladder_.betas[i]);
      Decomposition dec = random_decomposition(cfg_.np, slot.rng);
      pack_decomposition(dec, configs_[i]);
      refresh(configs_[i], rho_, kt_);
      snapshot_if_best(configs_[i], cfg_.residual_threshold);
      slots_.push_back(std::move(slot));
    }

    workers_ = cfg_.workers > 0 ? cfg_.workers
                                : static_cast<int>(std::thread::hardware_concurrency());
    workers_ = std::clamp(workers_, 1, m);
    start_pool();
  }

  ~Engine() {
    if (!crew_.empty()) {
      stop_ = true;
      enter_->arrive_and_wait();
    }
  }

  TuneReport tune() {
    TuneReport report;
    report.converged = true;
    report.max_last_rel_change = 0.0;
    std::vector<double> last_rates(stats_.pairs(), 0.0);

    if (cfg_.tune_iterations > 0) burn_in();

    for (int round = 0; round < cfg_.tune_iterations; ++round) {
      stats_.reset();
      for (auto& s : slots_) s.stats.reset();
      run_phase(cfg_.tune_sweeps, /*record_trace=*/false);

      bool covered = true;
      for (int k = 0; k < stats_.pairs(); ++k)
        if (stats_.attempts[k] < 1) covered = false;
      double max_rel = 0.0;
      if (covered) {
        last_rates = stats_.rates();
        // Laplace-smoothed estimates: a dead pair over a 50-sweep pilot is
        // indistinguishable from a ~2% pair, and raw zeros blow up the
        // normalization of the gap recursion.
        std::vector<double> smoothed(stats_.pairs());
        for (int k = 0; k < stats_.pairs(); ++k)
          smoothed[k] = static_cast<double>(stats_.accepts[k] + 1) /
                        static_cast<double>(stats_.attempts[k] + 2);
        const Ladder updated = update_ladder(ladder_, smoothed);
        max_rel = apply_trust_region(updated);
        for (int i = 0; i < cfg_.replicas; ++i) slots_[i].beta = ladder_.betas[i];
      }
      report.max_last_rel_change = max_rel;
      adapt_steps();
    }

    report.converged = report.max_last_rel_change <= 0.10;
    report.ladder = ladder_;
    report.pair_rates = last_rates;
    report.step_scales.reserve(slots_.size());
    for (const auto& s : slots_) report.step_scales.push_back(s.step);
    return report;
  }

  RoofResult run() {
    const TuneReport tuned = tune();

    stats_.reset();
    for (auto& s : slots_) s.stats.reset();
    trace_.clear();
    trace_.reserve(static_cast<size_t>(cfg_.sweeps / cfg_.exchange_period) + 1);
    run_phase(cfg_.sweeps, /*record_trace=*/true, /*adapt_every=*/50);

    if (std::getenv("TANGLE_DEBUG_SLOTS")) {
      for (int i = 0; i < cfg_.replicas; ++i) {
        const PackedConfig& c = configs_[slots_[i].config];
        std::fprintf(stderr,
                     "slot %2d beta=%.3e step=%.2e rot=%.2e E=%.6e r2=%.2e "
                     "avg=%.4f best=%d\n",
                     i, slots_[i].beta, slots_[i].step, slots_[i].rot_step,
                     c.energy(cfg_.kappa), c.r2, c.avg, c.has_best ? 1 : 0);
      }
      const PackedConfig& c = configs_[slots_[cfg_.replicas - 1].config];
      std::fprintf(stderr, "coldest |D| entries:\n");
      for (int a = 0; a < 8; ++a) {
        for (int b = 0; b < 8; ++b) {
          const int k = 8 * a + b;
          std::fprintf(stderr, "%8.1e ",
                       std::sqrt(c.dre[k] * c.dre[k] + c.dim[k] * c.dim[k]));
        }
        std::fprintf(stderr, "\n");
      }
      std::fprintf(stderr, "coldest weights:");
      for (double w : c.w) std::fprintf(stderr, " %.6f", w);
      std::fprintf(stderr, "\ncoldest taus:");
      for (double t : c.tau) std::fprintf(stderr, " %.6f", t);
      std::fprintf(stderr, "\n");
    }

    RoofResult result = collect();
    result.exchange_rates = stats_.rates();
    result.ladder_betas = ladder_.betas;
    result.step_scales = tuned.step_scales;
    result.tuner_converged = tuned.converged;
    result.energy_trace = std::move(trace_);
    return result;
  }

 private:
  double init_step(double beta) const {
    return std::clamp(std::sqrt(1.0 / (beta * cfg_.kappa)), 1e-8, 0.1);
  }

  void adapt_steps() {
    for (auto& s : slots_) {
      if (s.stats.amp_attempts > 0) {
        const double acc =
            static_cast<double>(s.stats.amp_accepts) / s.stats.amp_attempts;
        s.step = std::clamp(s.step * std::exp(1.2 * (acc - cfg_.step_accept_target)),
                            kStepScaleMin, kStepScaleMax);
      }
      if (s.stats.rot_attempts > 0) {
        const double acc =
            static_cast<double>(s.stats.rot_accepts) / s.stats.rot_attempts;
        s.rot_step =
            std::clamp(s.rot_step * std::exp(1.2 * (acc - cfg_.step_accept_target)),
                       kRotScaleMin, kRotScaleMax);
      }
    }
  }

  // Applies one recursion step with the per-round movement of any beta capped
  // at 30% (geometric interpolation). Far from the fixed point the raw
  // recursion overshoots by orders of magnitude when the measured rates are
  // strongly nonuniform; the cap keeps each round a bounded correction.
  // Returns the capped maximum relative change.
  double apply_trust_region(const Ladder& updated) {
    constexpr double kMaxLogMove = 0.262364264467491; // log(1.3)
    double max_log = 0.0;
    for (int i = 1; i < ladder_.size() - 1; ++i)
      max_log = std::max(max_log,
                         std::abs(std::log(updated.betas[i] / ladder_.betas[i])));
    const double gamma = max_log > kMaxLogMove ? kMaxLogMove / max_log : 1.0;
    double max_rel = 0.0;
    for (int i = 1; i < ladder_.size() - 1; ++i) {
      const double blended =
          ladder_.betas[i] *
          std::exp(gamma * std::log(updated.betas[i] / ladder_.betas[i]));
      max_rel = std::max(max_rel,
                         std::abs(blended - ladder_.betas[i]) / ladder_.betas[i]);
      ladder_.betas[i] = blended;
    }
    // monotonicity can only be violated by rounding in the blend; restore it
    for (int i = 1; i < ladder_.size() - 1; ++i)
      ladder_.betas[i] = std::max(ladder_.betas[i],
                                  ladder_.betas[i - 1] * (1.0 + 1e-12));
    return max_rel;
  }

  // Relaxes the replicas out of the initial random configurations before any
  // exchange rates are fed to the ladder recursion. Rates measured during the
  // early global descent are transient artifacts (everything falls together)
  // and would drive the gap update in the wrong direction.
  void burn_in() {
    const int64_t window = 2 * cfg_.tune_sweeps;
    double prev = min_energy();
    for (int w = 0; w < 50; ++w) {
      for (auto& s : slots_) s.stats.reset();
      run_phase(window, /*record_trace=*/false);
      adapt_steps();
      const double cur = min_energy();
      if (prev - cur < 0.01 * std::max(std::abs(cur), 0.02)) break;
      prev = cur;
    }
    stats_.reset();
  }

  void advance_slot(Slot& s, int64_t nsweeps) {
    PackedConfig& c = configs_[s.config];
    const int64_t moves = cfg_.n_vars();
    for (int64_t sweep = 0; sweep < nsweeps; ++sweep) {
      for (int64_t mv = 0; mv < moves; ++mv) {
        try_move(c, s.rng, s.beta, s.step, s.rot_step, cfg_.kappa,
                 cfg_.residual_threshold, rho_, kt_, s.stats);
      }
    }
    refresh(c, rho_, kt_);
    snapshot_if_best(c, cfg_.residual_threshold);
  }

  // Advances all slots in chunks of exchange_period sweeps with one exchange
  // round after each full chunk. Identical results for any worker count:
  // every slot owns its stream, and exchanges run serially in fixed order.
  // adapt_every > 0 keeps the move scales tracking the local acceptance rate
  // (updated at the synchronization points, so still deterministic); the
  // landscape a replica sees keeps narrowing as the residual refines, and
  // scales frozen against an earlier stage stall the cold chains.
  void run_phase(int64_t nsweeps, bool record_trace, int64_t adapt_every = 0) {
    int64_t done = 0;
    int64_t since_adapt = 0;
    while (done < nsweeps) {
      const int64_t chunk = std::min<int64_t>(cfg_.exchange_period, nsweeps - done);
      advance_all(chunk);
      done += chunk;
      since_adapt += chunk;
      if (chunk == cfg_.exchange_period) exchange_round();
      if (record_trace) trace_.push_back(min_energy());
      if (adapt_every > 0 && since_adapt >= adapt_every) {
        adapt_steps();
        for (auto& s : slots_) s.stats.reset();
        since_adapt = 0;
      }
    }
  }

  void advance_all(int64_t nsweeps) {
    if (workers_ == 1) {
      for (auto& s : slots_) advance_slot(s, nsweeps);
      return;
    }
    chunk_sweeps_ = nsweeps;
    enter_->arrive_and_wait();
    advance_range(0);
    leave_->arrive_and_wait();
  }

  void advance_range(int id) {
    // interleaved ownership: cold slots reject more and run cheaper, so
    // contiguous ranges would leave one worker idle
    for (int i = id; i < cfg_.replicas; i += workers_)
      advance_slot(slots_[i], chunk_sweeps_);
  }

  void start_pool() {
    if (workers_ == 1) return;
    enter_ = std::make_unique<std::barrier<>>(workers_);
    leave_ = std::make_unique<std::barrier<>>(workers_);
    crew_.reserve(workers_ - 1);
    for (int id = 1; id < workers_; ++id) {
      crew_.emplace_back([this, id] {
        while (true) {
          enter_->arrive_and_wait();
          if (stop_) return;
          advance_range(id);
          leave_->arrive_and_wait();
        }
      });
    }
  }

  double slot_energy(int i) const {
    return configs_[slots_[i].config].energy(cfg_.kappa);
  }

  double min_energy() const {
    double e = slot_energy(0);
    for (int i = 1; i < cfg_.replicas; ++i) e = std::min(e, slot_energy(i));
    return e;
  }

  void exchange_round() {
    std::vector<double> before;
    if (cfg_.check_exchange_conservation) {
      before.resize(cfg_.replicas);
      for (int i = 0; i < cfg_.replicas; ++i) before[i] = slot_energy(i);
      std::sort(before.begin(), before.end());
    }

    for (int parity = 0; parity < 2; ++parity) {
      for (int k = parity; k < cfg_.replicas - 1; k += 2) {
        stats_.attempts[k] += 1;
        const double e_lo = slot_energy(k);
        const double e_hi = slot_energy(k + 1);
        const double dh = -(slots_[k + 1].beta - slots_[k].beta) * (e_hi - e_lo);
        if (dh < 0.0 || xrng_.u01() < std::exp(-dh)) {
          std::swap(slots_[k].config, slots_[k + 1].config);
          stats_.accepts[k] += 1;
        }
      }
    }

    if (cfg_.check_exchange_conservation) {
      std::vector<double> after(cfg_.replicas);
      for (int i = 0; i < cfg_.replicas; ++i) after[i] = slot_energy(i);
      std::sort(after.begin(), after.end());
      if (after != before)
        throw std::logic_error("exchange round changed the replica energy multiset");
    }
  }

  RoofResult collect() {
    RoofResult result;
    result.np = cfg_.np;

    int best_config = -1;
    double best_avg = 0.0, best_r2 = 0.0;
    PackedConfig scratch;
    for (int i = 0; i < cfg_.replicas; ++i) {
      PackedConfig& c = configs_[i];
      if (!c.has_best) continue;
      result.feasible_replicas += 1;
      // exact recompute of the snapshot, independent of the cached values
      scratch.np = c.np;
      scratch.w = c.best_w;
      scratch.sr = c.best_sr;
      scratch.si = c.best_si;
      scratch.tau.assign(c.np, 0.0);
      refresh(scratch, rho_, kt_);
      if (scratch.r2 >= cfg_.residual_threshold) continue;
      if (best_config < 0 || scratch.avg < best_avg) {
        best_config = i;
        best_avg = scratch.avg;
        best_r2 = scratch.r2;
        result.best_dec = unpack(scratch.w, scratch.sr, scratch.si);
      }
    }
    if (best_config < 0)
      throw NoFeasiblePoint(
          "no visited decomposition reached residual < " +
          std::to_string(cfg_.residual_threshold) +
          " (kappa too low, np too small, or invalid target)");
    result.tau3 = best_avg;
    result.r2 = best_r2;
    return result;
  }

  EngineConfig cfg_;
  TargetSoa rho_;
  const kernels::KernelTable& kt_;
  Ladder ladder_;
  Rng xrng_;
  ExchangeStats stats_;
  std::vector<PackedConfig> configs_;
  std::vector<Slot> slots_;
  std::vector<double> trace_;
  int workers_ = 1;

  // persistent worker crew, active only when workers_ > 1
  std::vector<std::jthread> crew_;
  std::unique_ptr<std::barrier<>> enter_, leave_;
  int64_t chunk_sweeps_ = 0;
  bool stop_ = false;
};

} // namespace

RoofResult minimize(const EngineConfig& config, const EnergyParams& params) {
  Engine engine(config, params);
  return engine.run();
}

TuneReport tune_ladder(const EngineConfig& config, const EnergyParams& params) {
  Engine engine(config, params);
  return engine.tune();
}

// ---------------------------------------------------------------------------
// Constrained simulated annealing baseline
// ---------------------------------------------------------------------------

RoofResult csa_minimize(const EngineConfig& config, const EnergyParams& params) {
  config.validate();
  const DensityDiagnostics diag = validate_density(params.target);
  if (!diag.ok())
    throw std::invalid_argument("target is not a valid density matrix");
  if (config.np < diag.rank)
    throw std::invalid_argument("np is below the target rank");

  const TargetSoa rho(params.target);
  const auto& kt = kernels::active();

  Rng rng(config.seed, kCsaStream);
  PackedConfig c;
  pack_decomposition(random_decomposition(config.np, rng), c);
  refresh(c, rho, kt);
  snapshot_if_best(c, config.residual_threshold);

  // Matched budget: same total move count as minimize, tuning included.
  const int64_t blocks =
      static_cast<int64_t>(config.replicas) *
      (config.sweeps +
       static_cast<int64_t>(config.tune_iterations) * config.tune_sweeps);
  const int64_t moves_per_block = config.n_vars();
  const double log_tmax = std::log(config.t_max);
  const double log_tmin = std::log(config.t_min);
  const double denom = static_cast<double>(std::max<int64_t>(1, blocks - 1));

  double step = std::clamp(std::sqrt(config.t_max / config.kappa), 1e-8, 0.1);
  double rot_step = 0.7;
  RoofResult result;
  result.np = config.np;
  result.tuner_converged = true;
  result.energy_trace.reserve(
      static_cast<size_t>(blocks / std::max(1, config.replicas)) + 1);

  for (int64_t b = 0; b < blocks; ++b) {
    const double t =
        std::exp(log_tmax + (log_tmin - log_tmax) * static_cast<double>(b) / denom);
    const double beta = 1.0 / t;
    MoveStats stats;
    for (int64_t mv = 0; mv < moves_per_block; ++mv) {
      try_move(c, rng, beta, step, rot_step, config.kappa,
               config.residual_threshold, rho, kt, stats);
    }
    refresh(c, rho, kt);
    snapshot_if_best(c, config.residual_threshold);
    if (stats.amp_attempts > 0) {
      const double acc =
          static_cast<double>(stats.amp_accepts) / stats.amp_attempts;
      step = std::clamp(step * std::exp(1.2 * (acc - config.step_accept_target)),
                        kStepScaleMin, kStepScaleMax);
    }
    if (stats.rot_attempts > 0) {
      const double acc =
          static_cast<double>(stats.rot_accepts) / stats.rot_attempts;
      rot_step =
          std::clamp(rot_step * std::exp(1.2 * (acc - config.step_accept_target)),
                     kRotScaleMin, kRotScaleMax);
    }
    if (b % config.replicas == 0)
      result.energy_trace.push_back(c.energy(config.kappa));
  }

  if (!c.has_best)
    throw NoFeasiblePoint("annealing never reached residual < " +
                          std::to_string(config.residual_threshold));

  PackedConfig scratch;
  scratch.np = c.np;
  scratch.w = c.best_w;
  scratch.sr = c.best_sr;
  scratch.si = c.best_si;
  scratch.tau.assign(c.np, 0.0);
  refresh(scratch, rho, kt);
  if (scratch.r2 >= config.residual_threshold)
    throw NoFeasiblePoint("annealing never reached residual < " +
                          std::to_string(config.residual_threshold));
  result.tau3 = scratch.avg;
  result.r2 = scratch.r2;
  result.best_dec = unpack(scratch.w, scratch.sr, scratch.si);
  result.feasible_replicas = 1;
  return result;
}

} // namespace tangle
