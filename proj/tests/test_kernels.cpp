#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <array>
#include <cmath>
#include <complex>

#include "tangle/kernels.hpp"
#include "tangle/rng.hpp"

using namespace tangle;
using kernels::KernelTable;
using C = std::complex<double>;

namespace {

struct Mat {
  std::array<double, 64> re{}, im{};
};

struct State {
  std::array<double, 8> re{}, im{};
};

State random_state(Rng& rng, bool unit) {
  State s;
  double n2 = 0.0;
  for (int k = 0; k < 8; ++k) {
    s.re[k] = rng.normal();
    s.im[k] = rng.normal();
    n2 += s.re[k] * s.re[k] + s.im[k] * s.im[k];
  }
  if (unit) {
    const double inv = 1.0 / std::sqrt(n2);
    for (int k = 0; k < 8; ++k) {
      s.re[k] *= inv;
      s.im[k] *= inv;
    }
  }
  return s;
}

Mat random_mat(Rng& rng) {
  Mat m;
  for (int k = 0; k < 64; ++k) {
    m.re[k] = rng.normal();
    m.im[k] = rng.normal();
  }
  return m;
}

C entry(const Mat& m, int k) { return {m.re[k], m.im[k]}; }
C amp(const State& s, int k) { return {s.re[k], s.im[k]}; }

// Straightforward std::complex reimplementations used as the oracle.
double oracle_state_move_r2(const Mat& d, const State& o, const State& n,
                            double w) {
  double acc = 0.0;
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      const C t = entry(d, 8 * a + b) +
                  w * (amp(n, a) * std::conj(amp(n, b)) -
                       amp(o, a) * std::conj(amp(o, b)));
      acc += std::norm(t);
    }
  return acc;
}

double oracle_weight_move_r2(const Mat& d, const State& s, const Mat& rho,
                             double dp) {
  double acc = 0.0;
  for (int a = 0; a < 8; ++a)
    for (int b = 0; b < 8; ++b) {
      const int k = 8 * a + b;
      const C t = (entry(d, k) +
                   dp * (amp(s, a) * std::conj(amp(s, b)) - entry(rho, k))) /
                  (1.0 + dp);
      acc += std::norm(t);
    }
  return acc;
}

std::vector<const KernelTable*> backends() {
  std::vector<const KernelTable*> out{&kernels::scalar_table()};
#if defined(TANGLE_HAVE_AVX2_BUILD)
  if (kernels::avx2_supported()) out.push_back(&kernels::avx2_table());
#endif
  return out;
}

} // namespace

TEST_CASE("kernel backends agree with the complex-arithmetic oracle") {
  Rng rng(101);
  for (const KernelTable* kt : backends()) {
    CAPTURE(kt->name);
    for (int trial = 0; trial < 200; ++trial) {
      Mat d = random_mat(rng);
      Mat rho = random_mat(rng);
      const State o = random_state(rng, true);
      const State n = random_state(rng, true);
      const double w = rng.u01();
      const double dp = rng.normal() * 0.2;

      CHECK(kt->state_move_r2(d.re.data(), d.im.data(), o.re.data(), o.im.data(),
                              n.re.data(), n.im.data(), w) ==
            doctest::Approx(oracle_state_move_r2(d, o, n, w)).epsilon(1e-12));
      if (1.0 + dp > 0.1) {
        CHECK(kt->weight_move_r2(d.re.data(), d.im.data(), o.re.data(),
                                 o.im.data(), rho.re.data(), rho.im.data(), dp) ==
              doctest::Approx(oracle_weight_move_r2(d, o, rho, dp)).epsilon(1e-12));
      }

      // diff_norm_sq and sum_sq against direct sums
      double ref_diff = 0.0, ref_sum = 0.0;
      for (int k = 0; k < 64; ++k) {
        ref_diff += std::norm(entry(d, k) - entry(rho, k));
        ref_sum += std::norm(entry(d, k));
      }
      CHECK(kt->diff_norm_sq(d.re.data(), d.im.data(), rho.re.data(),
                             rho.im.data()) ==
            doctest::Approx(ref_diff).epsilon(1e-12));
      CHECK(kt->sum_sq(d.re.data(), d.im.data()) ==
            doctest::Approx(ref_sum).epsilon(1e-12));

      // outer_accum against direct accumulation
      Mat acc = d;
      kt->outer_accum(acc.re.data(), acc.im.data(), o.re.data(), o.im.data(), w);
      for (int a = 0; a < 8; ++a)
        for (int b = 0; b < 8; ++b) {
          const C ref = entry(d, 8 * a + b) + w * amp(o, a) * std::conj(amp(o, b));
          CHECK(std::abs(entry(acc, 8 * a + b) - ref) < 1e-13);
        }
    }
  }
}

TEST_CASE("commit kernels land exactly where the eval kernels predicted") {
  Rng rng(102);
  for (const KernelTable* kt : backends()) {
    CAPTURE(kt->name);
    for (int trial = 0; trial < 100; ++trial) {
      Mat d = random_mat(rng);
      Mat rho = random_mat(rng);
      const State o = random_state(rng, true);
      const State n = random_state(rng, true);
      const double w = rng.u01();

      const double predicted = kt->state_move_r2(
          d.re.data(), d.im.data(), o.re.data(), o.im.data(), n.re.data(),
          n.im.data(), w);
      kt->state_move_commit(d.re.data(), d.im.data(), o.re.data(), o.im.data(),
                            n.re.data(), n.im.data(), w);
      CHECK(kt->sum_sq(d.re.data(), d.im.data()) ==
            doctest::Approx(predicted).epsilon(1e-11));

      const double dp = 0.3;
      const double predicted_w =
          kt->weight_move_r2(d.re.data(), d.im.data(), o.re.data(), o.im.data(),
                             rho.re.data(), rho.im.data(), dp);
      kt->weight_move_commit(d.re.data(), d.im.data(), o.re.data(), o.im.data(),
                             rho.re.data(), rho.im.data(), dp);
      CHECK(kt->sum_sq(d.re.data(), d.im.data()) ==
            doctest::Approx(predicted_w).epsilon(1e-11));
    }
  }
}

#if defined(TANGLE_HAVE_AVX2_BUILD)
TEST_CASE("scalar and AVX2 backends are numerically equivalent") {
  if (!kernels::avx2_supported()) return;
  const KernelTable& sc = kernels::scalar_table();
  const KernelTable& vx = kernels::avx2_table();
  Rng rng(103);
  for (int trial = 0; trial < 500; ++trial) {
    Mat d = random_mat(rng);
    Mat rho = random_mat(rng);
    const State o = random_state(rng, true);
    const State n = random_state(rng, true);
    const double w = rng.u01();

    CHECK(sc.tangle8(o.re.data(), o.im.data()) ==
          doctest::Approx(vx.tangle8(o.re.data(), o.im.data())).epsilon(1e-13));
    CHECK(sc.state_move_r2(d.re.data(), d.im.data(), o.re.data(), o.im.data(),
                           n.re.data(), n.im.data(), w) ==
          doctest::Approx(vx.state_move_r2(d.re.data(), d.im.data(), o.re.data(),
                                           o.im.data(), n.re.data(), n.im.data(),
                                           w))
              .epsilon(1e-13));
    CHECK(sc.weight_move_r2(d.re.data(), d.im.data(), o.re.data(), o.im.data(),
                            rho.re.data(), rho.im.data(), 0.25) ==
          doctest::Approx(vx.weight_move_r2(d.re.data(), d.im.data(), o.re.data(),
                                            o.im.data(), rho.re.data(),
                                            rho.im.data(), 0.25))
              .epsilon(1e-13));
    CHECK(sc.diff_norm_sq(d.re.data(), d.im.data(), rho.re.data(),
                          rho.im.data()) ==
          doctest::Approx(vx.diff_norm_sq(d.re.data(), d.im.data(), rho.re.data(),
                                          rho.im.data()))
              .epsilon(1e-13));

    Mat ds = d, dv = d;
    sc.state_move_commit(ds.re.data(), ds.im.data(), o.re.data(), o.im.data(),
                         n.re.data(), n.im.data(), w);
    vx.state_move_commit(dv.re.data(), dv.im.data(), o.re.data(), o.im.data(),
                         n.re.data(), n.im.data(), w);
    for (int k = 0; k < 64; ++k) {
      CHECK(std::abs(ds.re[k] - dv.re[k]) < 1e-13);
      CHECK(std::abs(ds.im[k] - dv.im[k]) < 1e-13);
    }
  }
}
#endif

TEST_CASE("runtime dispatch is stable and forceable") {
  const KernelTable& first = kernels::active();
  CHECK(&kernels::active() == &first);
  kernels::force_backend(kernels::Backend::Scalar);
  CHECK(std::string(kernels::active().name) == "scalar");
  kernels::force_backend(kernels::Backend::Auto);
#if defined(TANGLE_HAVE_AVX2_BUILD)
  if (kernels::avx2_supported())
    CHECK(std::string(kernels::active().name) == "avx2");
#endif
}
