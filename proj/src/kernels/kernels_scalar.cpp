#include <complex>

#include "tangle/kernels.hpp"

// Scalar reference backend. Plain loops over the 64-entry working matrices;
// the AVX2 backend must agree with these within floating-point noise.

namespace tangle::kernels {
namespace {

constexpr int kDim = 8;
constexpr int kEntries = 64;

// tau3 = 4 |2 S2 - S1^2 + 4 d3| with the pair products
//   P = {c0 c7, c1 c6, c2 c5, c3 c4},  S1 = sum P,  S2 = sum P^2,
//   d3 = (c0 c3)(c5 c6) + (c1 c2)(c4 c7).
// This is the symmetric-function form of the degree-4 invariant; the
// term-by-term expansion is kept in the tests as an independent oracle.
double tangle8_scalar(const double* re, const double* im) {
  using C = std::complex<double>;
  const auto c = [&](int i) { return C(re[i], im[i]); };

  const C p0 = c(0) * c(7);
  const C p1 = c(1) * c(6);
  const C p2 = c(2) * c(5);
  const C p3 = c(3) * c(4);

  const C s1 = p0 + p1 + p2 + p3;
  const C s2 = p0 * p0 + p1 * p1 + p2 * p2 + p3 * p3;
  const C d3 = (c(0) * c(3)) * (c(5) * c(6)) + (c(1) * c(2)) * (c(4) * c(7));

  return 4.0 * std::abs(2.0 * s2 - s1 * s1 + 4.0 * d3);
}

void outer_accum_scalar(double* are, double* aim, const double* sre,
                        const double* sim, double w) {
  for (int a = 0; a < kDim; ++a) {
    for (int b = 0; b < kDim; ++b) {
      const int k = kDim * a + b;
      are[k] += w * (sre[a] * sre[b] + sim[a] * sim[b]);
      aim[k] += w * (sim[a] * sre[b] - sre[a] * sim[b]);
    }
  }
}

double diff_norm_sq_scalar(const double* are, const double* aim,
                           const double* bre, const double* bim) {
  double acc = 0.0;
  for (int k = 0; k < kEntries; ++k) {
    const double dr = are[k] - bre[k];
    const double di = aim[k] - bim[k];
    acc += dr * dr + di * di;
  }
  return acc;
}

double sum_sq_scalar(const double* are, const double* aim) {
  double acc = 0.0;
  for (int k = 0; k < kEntries; ++k) acc += are[k] * are[k] + aim[k] * aim[k];
  return acc;
}

double state_move_r2_scalar(const double* dre, const double* dim,
                            const double* ore, const double* oim,
                            const double* nre, const double* nim, double w) {
  double acc = 0.0;
  for (int a = 0; a < kDim; ++a) {
    for (int b = 0; b < kDim; ++b) {
      const int k = kDim * a + b;
      const double tre = dre[k] + w * (nre[a] * nre[b] + nim[a] * nim[b] -
                                       ore[a] * ore[b] - oim[a] * oim[b]);
      const double tim = dim[k] + w * (nim[a] * nre[b] - nre[a] * nim[b] -
                                       oim[a] * ore[b] + ore[a] * oim[b]);
      acc += tre * tre + tim * tim;
    }
  }
  return acc;
}

void state_move_commit_scalar(double* dre, double* dim, const double* ore,
                              const double* oim, const double* nre,
                              const double* nim, double w) {
  for (int a = 0; a < kDim; ++a) {
    for (int b = 0; b < kDim; ++b) {
      const int k = kDim * a + b;
      dre[k] += w * (nre[a] * nre[b] + nim[a] * nim[b] - ore[a] * ore[b] -
                     oim[a] * oim[b]);
      dim[k] += w * (nim[a] * nre[b] - nre[a] * nim[b] - oim[a] * ore[b] +
                     ore[a] * oim[b]);
    }
  }
}

double weight_move_r2_scalar(const double* dre, const double* dim,
                             const double* sre, const double* sim,
                             const double* rre, const double* rim, double dp) {
  const double inv = 1.0 / (1.0 + dp);
  double acc = 0.0;
  for (int a = 0; a < kDim; ++a) {
    for (int b = 0; b < kDim; ++b) {
      const int k = kDim * a + b;
      const double tre =
          (dre[k] + dp * (sre[a] * sre[b] + sim[a] * sim[b] - rre[k])) * inv;
      const double tim =
          (dim[k] + dp * (sim[a] * sre[b] - sre[a] * sim[b] - rim[k])) * inv;
      acc += tre * tre + tim * tim;
    }
  }
  return acc;
}

void weight_move_commit_scalar(double* dre, double* dim, const double* sre,
                               const double* sim, const double* rre,
                               const double* rim, double dp) {
  const double inv = 1.0 / (1.0 + dp);
  for (int a = 0; a < kDim; ++a) {
    for (int b = 0; b < kDim; ++b) {
      const int k = kDim * a + b;
      dre[k] = (dre[k] + dp * (sre[a] * sre[b] + sim[a] * sim[b] - rre[k])) * inv;
      dim[k] = (dim[k] + dp * (sim[a] * sre[b] - sre[a] * sim[b] - rim[k])) * inv;
    }
  }
}

double pair_move_r2_scalar(const double* dre, const double* dim,
                           const double* o1re, const double* o1im, double w1,
                           const double* o2re, const double* o2im, double w2,
                           const double* n1re, const double* n1im, double v1,
                           const double* n2re, const double* n2im, double v2) {
  double acc = 0.0;
  for (int a = 0; a < kDim; ++a) {
    for (int b = 0; b < kDim; ++b) {
      const int k = kDim * a + b;
      const double tre = dre[k] + v1 * (n1re[a] * n1re[b] + n1im[a] * n1im[b]) +
                         v2 * (n2re[a] * n2re[b] + n2im[a] * n2im[b]) -
                         w1 * (o1re[a] * o1re[b] + o1im[a] * o1im[b]) -
                         w2 * (o2re[a] * o2re[b] + o2im[a] * o2im[b]);
      const double tim = dim[k] + v1 * (n1im[a] * n1re[b] - n1re[a] * n1im[b]) +
                         v2 * (n2im[a] * n2re[b] - n2re[a] * n2im[b]) -
                         w1 * (o1im[a] * o1re[b] - o1re[a] * o1im[b]) -
                         w2 * (o2im[a] * o2re[b] - o2re[a] * o2im[b]);
      acc += tre * tre + tim * tim;
    }
  }
  return acc;
}

void pair_move_commit_scalar(double* dre, double* dim, const double* o1re,
                             const double* o1im, double w1, const double* o2re,
                             const double* o2im, double w2, const double* n1re,
                             const double* n1im, double v1, const double* n2re,
                             const double* n2im, double v2) {
  for (int a = 0; a < kDim; ++a) {
    for (int b = 0; b < kDim; ++b) {
      const int k = kDim * a + b;
      dre[k] += v1 * (n1re[a] * n1re[b] + n1im[a] * n1im[b]) +
                v2 * (n2re[a] * n2re[b] + n2im[a] * n2im[b]) -
                w1 * (o1re[a] * o1re[b] + o1im[a] * o1im[b]) -
                w2 * (o2re[a] * o2re[b] + o2im[a] * o2im[b]);
      dim[k] += v1 * (n1im[a] * n1re[b] - n1re[a] * n1im[b]) +
                v2 * (n2im[a] * n2re[b] - n2re[a] * n2im[b]) -
                w1 * (o1im[a] * o1re[b] - o1re[a] * o1im[b]) -
                w2 * (o2im[a] * o2re[b] - o2re[a] * o2im[b]);
    }
  }
}

} // namespace

const KernelTable& scalar_table() {
  static const KernelTable table{
      "scalar",
      tangle8_scalar,
      outer_accum_scalar,
      diff_norm_sq_scalar,
      sum_sq_scalar,
      state_move_r2_scalar,
      state_move_commit_scalar,
      weight_move_r2_scalar,
      weight_move_commit_scalar,
      pair_move_r2_scalar,
      pair_move_commit_scalar,
  };
  return table;
}

} // namespace tangle::kernels
