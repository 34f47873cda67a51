#include <complex>
#include <immintrin.h>

#include "tangle/kernels.hpp"

// AVX2/FMA backend. The 8x8 working matrices are processed as 8 rows of two
// 4-lane column groups; the 4-wide column loads of the member states are
// hoisted out of the row loop. Compiled only with -mavx2 -mfma; callers go
// through the runtime dispatch in kernels.cpp.

namespace tangle::kernels {
namespace {

constexpr int kDim = 8;

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

double tangle8_avx2(const double* re, const double* im) {
  using C = std::complex<double>;

  // pair products (c0 c7, c1 c6, c2 c5, c3 c4) in one shot
  const __m256d xr = _mm256_loadu_pd(re);
  const __m256d xi = _mm256_loadu_pd(im);
  const __m256d yr = _mm256_permute4x64_pd(_mm256_loadu_pd(re + 4), 0x1B);
  const __m256d yi = _mm256_permute4x64_pd(_mm256_loadu_pd(im + 4), 0x1B);

  const __m256d pr = _mm256_fmsub_pd(xr, yr, _mm256_mul_pd(xi, yi));
  const __m256d pi = _mm256_fmadd_pd(xr, yi, _mm256_mul_pd(xi, yr));

  const C s1(hsum(pr), hsum(pi));
  const __m256d p2r = _mm256_fmsub_pd(pr, pr, _mm256_mul_pd(pi, pi));
  const __m256d p2i = _mm256_mul_pd(_mm256_set1_pd(2.0), _mm256_mul_pd(pr, pi));
  const C s2(hsum(p2r), hsum(p2i));

  const auto c = [&](int k) { return C(re[k], im[k]); };
  const C d3 = (c(0) * c(3)) * (c(5) * c(6)) + (c(1) * c(2)) * (c(4) * c(7));

  return 4.0 * std::abs(2.0 * s2 - s1 * s1 + 4.0 * d3);
}

void outer_accum_avx2(double* are, double* aim, const double* sre,
                      const double* sim, double w) {
  const __m256d wv = _mm256_set1_pd(w);
  const __m256d srb[2] = {_mm256_loadu_pd(sre), _mm256_loadu_pd(sre + 4)};
  const __m256d sib[2] = {_mm256_loadu_pd(sim), _mm256_loadu_pd(sim + 4)};
  for (int a = 0; a < kDim; ++a) {
    const __m256d sra = _mm256_set1_pd(sre[a]);
    const __m256d sia = _mm256_set1_pd(sim[a]);
    for (int g = 0; g < 2; ++g) {
      const int k = kDim * a + 4 * g;
      const __m256d ore = _mm256_fmadd_pd(sra, srb[g], _mm256_mul_pd(sia, sib[g]));
      const __m256d oim = _mm256_fnmadd_pd(sra, sib[g], _mm256_mul_pd(sia, srb[g]));
      _mm256_storeu_pd(are + k, _mm256_fmadd_pd(wv, ore, _mm256_loadu_pd(are + k)));
      _mm256_storeu_pd(aim + k, _mm256_fmadd_pd(wv, oim, _mm256_loadu_pd(aim + k)));
    }
  }
}

double diff_norm_sq_avx2(const double* are, const double* aim,
                         const double* bre, const double* bim) {
  __m256d acc = _mm256_setzero_pd();
  for (int k = 0; k < 64; k += 4) {
    const __m256d dr = _mm256_sub_pd(_mm256_loadu_pd(are + k), _mm256_loadu_pd(bre + k));
    const __m256d di = _mm256_sub_pd(_mm256_loadu_pd(aim + k), _mm256_loadu_pd(bim + k));
    acc = _mm256_fmadd_pd(dr, dr, acc);
    acc = _mm256_fmadd_pd(di, di, acc);
  }
  return hsum(acc);
}

double sum_sq_avx2(const double* are, const double* aim) {
  __m256d acc = _mm256_setzero_pd();
  for (int k = 0; k < 64; k += 4) {
    const __m256d r = _mm256_loadu_pd(are + k);
    const __m256d i = _mm256_loadu_pd(aim + k);
    acc = _mm256_fmadd_pd(r, r, acc);
    acc = _mm256_fmadd_pd(i, i, acc);
  }
  return hsum(acc);
}

double state_move_r2_avx2(const double* dre, const double* dim,
                          const double* ore, const double* oim,
                          const double* nre, const double* nim, double w) {
  const __m256d wv = _mm256_set1_pd(w);
  const __m256d nrb[2] = {_mm256_loadu_pd(nre), _mm256_loadu_pd(nre + 4)};
  const __m256d nib[2] = {_mm256_loadu_pd(nim), _mm256_loadu_pd(nim + 4)};
  const __m256d orb[2] = {_mm256_loadu_pd(ore), _mm256_loadu_pd(ore + 4)};
  const __m256d oib[2] = {_mm256_loadu_pd(oim), _mm256_loadu_pd(oim + 4)};
  __m256d acc = _mm256_setzero_pd();
  for (int a = 0; a < kDim; ++a) {
    const __m256d nra = _mm256_set1_pd(nre[a]);
    const __m256d nia = _mm256_set1_pd(nim[a]);
    const __m256d ora = _mm256_set1_pd(ore[a]);
    const __m256d oia = _mm256_set1_pd(oim[a]);
    for (int g = 0; g < 2; ++g) {
      const int k = kDim * a + 4 * g;
      const __m256d newr = _mm256_fmadd_pd(nra, nrb[g], _mm256_mul_pd(nia, nib[g]));
      const __m256d oldr = _mm256_fmadd_pd(ora, orb[g], _mm256_mul_pd(oia, oib[g]));
      const __m256d tre = _mm256_fmadd_pd(wv, _mm256_sub_pd(newr, oldr),
                                          _mm256_loadu_pd(dre + k));
      const __m256d newi = _mm256_fnmadd_pd(nra, nib[g], _mm256_mul_pd(nia, nrb[g]));
      const __m256d oldi = _mm256_fnmadd_pd(ora, oib[g], _mm256_mul_pd(oia, orb[g]));
      const __m256d tim = _mm256_fmadd_pd(wv, _mm256_sub_pd(newi, oldi),
                                          _mm256_loadu_pd(dim + k));
      acc = _mm256_fmadd_pd(tre, tre, acc);
      acc = _mm256_fmadd_pd(tim, tim, acc);
    }
  }
  return hsum(acc);
}

void state_move_commit_avx2(double* dre, double* dim, const double* ore,
                            const double* oim, const double* nre,
                            const double* nim, double w) {
  const __m256d wv = _mm256_set1_pd(w);
  const __m256d nrb[2] = {_mm256_loadu_pd(nre), _mm256_loadu_pd(nre + 4)};
  const __m256d nib[2] = {_mm256_loadu_pd(nim), _mm256_loadu_pd(nim + 4)};
  const __m256d orb[2] = {_mm256_loadu_pd(ore), _mm256_loadu_pd(ore + 4)};
  const __m256d oib[2] = {_mm256_loadu_pd(oim), _mm256_loadu_pd(oim + 4)};
  for (int a = 0; a < kDim; ++a) {
    const __m256d nra = _mm256_set1_pd(nre[a]);
    const __m256d nia = _mm256_set1_pd(nim[a]);
    const __m256d ora = _mm256_set1_pd(ore[a]);
    const __m256d oia = _mm256_set1_pd(oim[a]);
    for (int g = 0; g < 2; ++g) {
      const int k = kDim * a + 4 * g;
      const __m256d newr = _mm256_fmadd_pd(nra, nrb[g], _mm256_mul_pd(nia, nib[g]));
      const __m256d oldr = _mm256_fmadd_pd(ora, orb[g], _mm256_mul_pd(oia, oib[g]));
      _mm256_storeu_pd(dre + k, _mm256_fmadd_pd(wv, _mm256_sub_pd(newr, oldr),
                                                _mm256_loadu_pd(dre + k)));
      const __m256d newi = _mm256_fnmadd_pd(nra, nib[g], _mm256_mul_pd(nia, nrb[g]));
      const __m256d oldi = _mm256_fnmadd_pd(ora, oib[g], _mm256_mul_pd(oia, orb[g]));
      _mm256_storeu_pd(dim + k, _mm256_fmadd_pd(wv, _mm256_sub_pd(newi, oldi),
                                                _mm256_loadu_pd(dim + k)));
    }
  }
}

double weight_move_r2_avx2(const double* dre, const double* dim,
                           const double* sre, const double* sim,
                           const double* rre, const double* rim, double dp) {
  const __m256d dpv = _mm256_set1_pd(dp);
  const __m256d inv = _mm256_set1_pd(1.0 / (1.0 + dp));
  const __m256d srb[2] = {_mm256_loadu_pd(sre), _mm256_loadu_pd(sre + 4)};
  const __m256d sib[2] = {_mm256_loadu_pd(sim), _mm256_loadu_pd(sim + 4)};
  __m256d acc = _mm256_setzero_pd();
  for (int a = 0; a < kDim; ++a) {
    const __m256d sra = _mm256_set1_pd(sre[a]);
    const __m256d sia = _mm256_set1_pd(sim[a]);
    for (int g = 0; g < 2; ++g) {
      const int k = kDim * a + 4 * g;
      const __m256d pre = _mm256_fmadd_pd(sra, srb[g], _mm256_mul_pd(sia, sib[g]));
      const __m256d tre = _mm256_mul_pd(
          _mm256_fmadd_pd(dpv, _mm256_sub_pd(pre, _mm256_loadu_pd(rre + k)),
                          _mm256_loadu_pd(dre + k)),
          inv);
      const __m256d pim = _mm256_fnmadd_pd(sra, sib[g], _mm256_mul_pd(sia, srb[g]));
      const __m256d tim = _mm256_mul_pd(
          _mm256_fmadd_pd(dpv, _mm256_sub_pd(pim, _mm256_loadu_pd(rim + k)),
                          _mm256_loadu_pd(dim + k)),
          inv);
      acc = _mm256_fmadd_pd(tre, tre, acc);
      acc = _mm256_fmadd_pd(tim, tim, acc);
    }
  }
  return hsum(acc);
}

void weight_move_commit_avx2(double* dre, double* dim, const double* sre,
                             const double* sim, const double* rre,
                             const double* rim, double dp) {
  const __m256d dpv = _mm256_set1_pd(dp);
  const __m256d inv = _mm256_set1_pd(1.0 / (1.0 + dp));
  const __m256d srb[2] = {_mm256_loadu_pd(sre), _mm256_loadu_pd(sre + 4)};
  const __m256d sib[2] = {_mm256_loadu_pd(sim), _mm256_loadu_pd(sim + 4)};
  for (int a = 0; a < kDim; ++a) {
    const __m256d sra = _mm256_set1_pd(sre[a]);
    const __m256d sia = _mm256_set1_pd(sim[a]);
    for (int g = 0; g < 2; ++g) {
      const int k = kDim * a + 4 * g;
      const __m256d pre = _mm256_fmadd_pd(sra, srb[g], _mm256_mul_pd(sia, sib[g]));
      _mm256_storeu_pd(
          dre + k,
          _mm256_mul_pd(
              _mm256_fmadd_pd(dpv, _mm256_sub_pd(pre, _mm256_loadu_pd(rre + k)),
                              _mm256_loadu_pd(dre + k)),
              inv));
      const __m256d pim = _mm256_fnmadd_pd(sra, sib[g], _mm256_mul_pd(sia, srb[g]));
      _mm256_storeu_pd(
          dim + k,
          _mm256_mul_pd(
              _mm256_fmadd_pd(dpv, _mm256_sub_pd(pim, _mm256_loadu_pd(rim + k)),
                              _mm256_loadu_pd(dim + k)),
              inv));
    }
  }
}

// Rank-2 replace: outer-product lanes for the four involved states.
struct PairLanes {
  __m256d rb[2], ib[2];
  __m256d wv;

  PairLanes(const double* re, const double* im, double w)
      : rb{_mm256_loadu_pd(re), _mm256_loadu_pd(re + 4)},
        ib{_mm256_loadu_pd(im), _mm256_loadu_pd(im + 4)},
        wv(_mm256_set1_pd(w)) {}
};

inline __m256d pair_term_re(const PairLanes& s, double ra, double ia, int g) {
  const __m256d rav = _mm256_set1_pd(ra);
  const __m256d iav = _mm256_set1_pd(ia);
  return _mm256_mul_pd(
      s.wv, _mm256_fmadd_pd(rav, s.rb[g], _mm256_mul_pd(iav, s.ib[g])));
}

inline __m256d pair_term_im(const PairLanes& s, double ra, double ia, int g) {
  const __m256d rav = _mm256_set1_pd(ra);
  const __m256d iav = _mm256_set1_pd(ia);
  return _mm256_mul_pd(
      s.wv, _mm256_fnmadd_pd(rav, s.ib[g], _mm256_mul_pd(iav, s.rb[g])));
}

double pair_move_r2_avx2(const double* dre, const double* dim,
                         const double* o1re, const double* o1im, double w1,
                         const double* o2re, const double* o2im, double w2,
                         const double* n1re, const double* n1im, double v1,
                         const double* n2re, const double* n2im, double v2) {
  const PairLanes o1(o1re, o1im, w1), o2(o2re, o2im, w2);
  const PairLanes n1(n1re, n1im, v1), n2(n2re, n2im, v2);
  __m256d acc = _mm256_setzero_pd();
  for (int a = 0; a < kDim; ++a) {
    for (int g = 0; g < 2; ++g) {
      const int k = kDim * a + 4 * g;
      __m256d tre = _mm256_loadu_pd(dre + k);
      tre = _mm256_add_pd(tre, pair_term_re(n1, n1re[a], n1im[a], g));
      tre = _mm256_add_pd(tre, pair_term_re(n2, n2re[a], n2im[a], g));
      tre = _mm256_sub_pd(tre, pair_term_re(o1, o1re[a], o1im[a], g));
      tre = _mm256_sub_pd(tre, pair_term_re(o2, o2re[a], o2im[a], g));
      __m256d tim = _mm256_loadu_pd(dim + k);
      tim = _mm256_add_pd(tim, pair_term_im(n1, n1re[a], n1im[a], g));
      tim = _mm256_add_pd(tim, pair_term_im(n2, n2re[a], n2im[a], g));
      tim = _mm256_sub_pd(tim, pair_term_im(o1, o1re[a], o1im[a], g));
      tim = _mm256_sub_pd(tim, pair_term_im(o2, o2re[a], o2im[a], g));
      acc = _mm256_fmadd_pd(tre, tre, acc);
      acc = _mm256_fmadd_pd(tim, tim, acc);
    }
  }
  return hsum(acc);
}

void pair_move_commit_avx2(double* dre, double* dim, const double* o1re,
                           const double* o1im, double w1, const double* o2re,
                           const double* o2im, double w2, const double* n1re,
                           const double* n1im, double v1, const double* n2re,
                           const double* n2im, double v2) {
  const PairLanes o1(o1re, o1im, w1), o2(o2re, o2im, w2);
  const PairLanes n1(n1re, n1im, v1), n2(n2re, n2im, v2);
  for (int a = 0; a < kDim; ++a) {
    for (int g = 0; g < 2; ++g) {
      const int k = kDim * a + 4 * g;
      __m256d tre = _mm256_loadu_pd(dre + k);
      tre = _mm256_add_pd(tre, pair_term_re(n1, n1re[a], n1im[a], g));
      tre = _mm256_add_pd(tre, pair_term_re(n2, n2re[a], n2im[a], g));
      tre = _mm256_sub_pd(tre, pair_term_re(o1, o1re[a], o1im[a], g));
      tre = _mm256_sub_pd(tre, pair_term_re(o2, o2re[a], o2im[a], g));
      _mm256_storeu_pd(dre + k, tre);
      __m256d tim = _mm256_loadu_pd(dim + k);
      tim = _mm256_add_pd(tim, pair_term_im(n1, n1re[a], n1im[a], g));
      tim = _mm256_add_pd(tim, pair_term_im(n2, n2re[a], n2im[a], g));
      tim = _mm256_sub_pd(tim, pair_term_im(o1, o1re[a], o1im[a], g));
      tim = _mm256_sub_pd(tim, pair_term_im(o2, o2re[a], o2im[a], g));
      _mm256_storeu_pd(dim + k, tim);
    }
  }
}

} // namespace

const KernelTable& avx2_table() {
  static const KernelTable table{
      "avx2",
      tangle8_avx2,
      outer_accum_avx2,
      diff_norm_sq_avx2,
      sum_sq_avx2,
      state_move_r2_avx2,
      state_move_commit_avx2,
      weight_move_r2_avx2,
      weight_move_commit_avx2,
      pair_move_r2_avx2,
      pair_move_commit_avx2,
  };
  return table;
}

} // namespace tangle::kernels
