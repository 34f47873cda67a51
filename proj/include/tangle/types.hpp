#pragma once

#include <array>
#include <complex>
#include <cstdint>

namespace tangle {

using Amp = std::complex<double>;

// Three qubits on the computational basis. Basis label convention used by
// every module: index = 4*jA + 2*jB + jC, i.e. qubit A is the most
// significant bit (|011> -> 3, |100> -> 4, ...).
inline constexpr int kBasisDim = 8;
inline constexpr int kDensityEntries = kBasisDim * kBasisDim;

// Tolerances shared across modules.
inline constexpr double kNormTol = 1e-12;      // unit-norm / unit-trace checks
inline constexpr double kHermitianTol = 1e-12; // Hermiticity deviation
inline constexpr double kPsdTol = -1e-10;      // smallest admissible eigenvalue
inline constexpr double kRankEps = 1e-10;      // eigenvalue > eps counts toward rank

struct PureState {
  std::array<Amp, kBasisDim> c{};

  double norm_sq() const;
  // Rescales to unit norm. Leaves the state bitwise untouched when the norm
  // is already within a few ulp of 1, so it is idempotent. Throws
  // std::invalid_argument on (numerically) zero norm.
  PureState normalized() const;
};

struct TwoQubitState {
  std::array<Amp, 4> c{}; // indexed 00, 01, 10, 11

  double norm_sq() const;
  TwoQubitState normalized() const;
};

// 8x8 complex matrix, row major: entry(a,b) = m[8*a + b].
struct DensityMatrix {
  std::array<Amp, kDensityEntries> m{};

  Amp& operator()(int a, int b) { return m[kBasisDim * a + b]; }
  const Amp& operator()(int a, int b) const { return m[kBasisDim * a + b]; }
  double trace_real() const;
};

struct DensityDiagnostics {
  double hermiticity_dev = 0.0; // max_ab |m(a,b) - conj(m(b,a))|
  double trace_dev = 0.0;       // |tr(m) - 1|
  double min_eigenvalue = 0.0;
  int rank = 0;                 // eigenvalues above kRankEps

  bool hermitian_ok() const { return hermiticity_dev <= kHermitianTol; }
  bool trace_ok() const { return trace_dev <= kNormTol; }
  bool psd_ok() const { return min_eigenvalue >= kPsdTol; }
  bool ok() const { return hermitian_ok() && trace_ok() && psd_ok(); }
};

} // namespace tangle
