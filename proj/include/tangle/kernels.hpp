#pragma once

// Arithmetic kernels for the Monte Carlo inner loop, in split re/im layout.
//
// All kernels operate on the 8-amplitude states and the 8x8 realized-density
// working matrices of the optimizer. `d` arrays hold the difference
// D = sum_i w_i |s_i><s_i| - rho (64 doubles each for re and im, row major);
// state arrays hold 8 doubles each for re and im.
//
// Two interchangeable backends exist: a scalar reference implementation and
// an AVX2/FMA implementation selected at runtime when the CPU supports it.
// Backends are equivalence-tested against each other; any single process run
// uses exactly one backend throughout, so results stay deterministic.

namespace tangle::kernels {

enum class Backend { Auto, Scalar, Avx2 };

struct KernelTable {
  const char* name;

  // Three-tangle of a unit 8-amplitude state.
  double (*tangle8)(const double* re, const double* im);

  // a += w * (s s^dagger), 64 complex entries.
  void (*outer_accum)(double* are, double* aim, const double* sre,
                      const double* sim, double w);

  // sum_k (are-bre)^2 + (aim-bim)^2 over 64 entries.
  double (*diff_norm_sq)(const double* are, const double* aim,
                         const double* bre, const double* bim);

  // sum_k are^2 + aim^2 over 64 entries.
  double (*sum_sq)(const double* are, const double* aim);

  // Residual after replacing one member state: sum |D + w (n n^+ - o o^+)|^2.
  double (*state_move_r2)(const double* dre, const double* dim,
                          const double* ore, const double* oim,
                          const double* nre, const double* nim, double w);
  void (*state_move_commit)(double* dre, double* dim, const double* ore,
                            const double* oim, const double* nre,
                            const double* nim, double w);

  // Residual after bumping one weight by dp (all weights then renormalize):
  // sum |(D + dp (s s^+ - rho)) / (1 + dp)|^2.
  double (*weight_move_r2)(const double* dre, const double* dim,
                           const double* sre, const double* sim,
                           const double* rre, const double* rim, double dp);
  void (*weight_move_commit)(double* dre, double* dim, const double* sre,
                             const double* sim, const double* rre,
                             const double* rim, double dp);

  // Residual after replacing two weighted members:
  // sum |D + v1 n1 n1^+ + v2 n2 n2^+ - w1 o1 o1^+ - w2 o2 o2^+|^2.
  double (*pair_move_r2)(const double* dre, const double* dim,
                         const double* o1re, const double* o1im, double w1,
                         const double* o2re, const double* o2im, double w2,
                         const double* n1re, const double* n1im, double v1,
                         const double* n2re, const double* n2im, double v2);
  void (*pair_move_commit)(double* dre, double* dim, const double* o1re,
                           const double* o1im, double w1, const double* o2re,
                           const double* o2im, double w2, const double* n1re,
                           const double* n1im, double v1, const double* n2re,
                           const double* n2im, double v2);
};

const KernelTable& scalar_table();
#if defined(TANGLE_HAVE_AVX2_BUILD)
const KernelTable& avx2_table();
#endif

// True when the running CPU can execute the AVX2 backend.
bool avx2_supported();

// The active backend. Resolved once: TANGLE_KERNELS=scalar|avx2 in the
// environment wins, otherwise AVX2 when available, else scalar.
const KernelTable& active();

// Test hook; throws std::invalid_argument if the backend is unavailable.
void force_backend(Backend b);

} // namespace tangle::kernels
