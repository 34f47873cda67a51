#include "tangle/qstate.hpp"

#include <cmath>
#include <stdexcept>

#include <Eigen/Dense>

#include "tangle/kernels.hpp"

namespace tangle {

namespace {

// Norms within this distance of 1 are left untouched by normalization,
// which makes repeated normalization bitwise idempotent.
constexpr double kSkipRenorm = 0x1.0p-48;

constexpr double kParamNormTol = 1e-6;
constexpr double kInvSqrt2 = 0.70710678118654752440;
constexpr double kInvSqrt3 = 0.57735026918962576451;

void require_finite(double v, const char* what) {
  if (!std::isfinite(v))
    throw std::invalid_argument(std::string("non-finite parameter: ") + what);
}

} // namespace

double PureState::norm_sq() const {
  double acc = 0.0;
  for (const auto& a : c) acc += std::norm(a);
  return acc;
}

PureState PureState::normalized() const {
  const double n2 = norm_sq();
  if (std::abs(n2 - 1.0) <= kSkipRenorm) return *this;
  if (!(n2 > 1e-24))
    throw std::invalid_argument("cannot normalize a zero-norm state");
  PureState out = *this;
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& a : out.c) a *= inv;
  return out;
}

double TwoQubitState::norm_sq() const {
  double acc = 0.0;
  for (const auto& a : c) acc += std::norm(a);
  return acc;
}

TwoQubitState TwoQubitState::normalized() const {
  const double n2 = norm_sq();
  if (std::abs(n2 - 1.0) <= kSkipRenorm) return *this;
  if (!(n2 > 1e-24))
    throw std::invalid_argument("cannot normalize a zero-norm state");
  TwoQubitState out = *this;
  const double inv = 1.0 / std::sqrt(n2);
  for (auto& a : out.c) a *= inv;
  return out;
}

double DensityMatrix::trace_real() const {
  double tr = 0.0;
  for (int a = 0; a < kBasisDim; ++a) tr += (*this)(a, a).real();
  return tr;
}

PureState make_pure(const StateFamily& family) {
  PureState psi;
  std::visit(
      [&](const auto& f) {
        using T = std::decay_t<decltype(f)>;
        if constexpr (std::is_same_v<T, Ghz>) {
          psi.c[0] = psi.c[7] = kInvSqrt2;
        } else if constexpr (std::is_same_v<T, W>) {
          psi.c[1] = psi.c[2] = psi.c[4] = kInvSqrt3;
        } else if constexpr (std::is_same_v<T, FlippedW>) {
          psi.c[3] = psi.c[5] = psi.c[6] = kInvSqrt3;
        } else if constexpr (std::is_same_v<T, GeneralizedGhz>) {
          require_finite(f.a, "a");
          require_finite(f.b, "b");
          const double n = f.a * f.a + f.b * f.b;
          if (std::abs(n - 1.0) > kParamNormTol)
            throw std::invalid_argument("generalized GHZ parameters violate a^2+b^2=1");
          psi.c[0] = f.a;
          psi.c[7] = f.b;
        } else if constexpr (std::is_same_v<T, GeneralizedW>) {
          require_finite(f.c, "c");
          require_finite(f.d, "d");
          require_finite(f.f, "f");
          const double n = f.c * f.c + f.d * f.d + f.f * f.f;
          if (std::abs(n - 1.0) > kParamNormTol)
            throw std::invalid_argument("generalized W parameters violate c^2+d^2+f^2=1");
          psi.c[1] = f.c;
          psi.c[2] = f.d;
          psi.c[4] = f.f;
        } else if constexpr (std::is_same_v<T, RawState>) {
          double n = 0.0;
          for (const auto& a : f.coeffs) {
            require_finite(a.real(), "coeff");
            require_finite(a.imag(), "coeff");
            n += std::norm(a);
          }
          if (std::abs(n - 1.0) > kParamNormTol)
            throw std::invalid_argument("raw coefficients are not normalized");
          psi.c = f.coeffs;
        }
      },
      family);
  return psi.normalized();
}

double three_tangle_pure(const PureState& psi) {
  double re[kBasisDim], im[kBasisDim];
  for (int k = 0; k < kBasisDim; ++k) {
    re[k] = psi.c[k].real();
    im[k] = psi.c[k].imag();
  }
  return kernels::active().tangle8(re, im);
}

double concurrence_pure(const TwoQubitState& psi) {
  return 2.0 * std::abs(psi.c[0] * psi.c[3] - psi.c[1] * psi.c[2]);
}

DensityMatrix pure_projector(const PureState& psi) {
  DensityMatrix rho;
  for (int a = 0; a < kBasisDim; ++a)
    for (int b = 0; b < kBasisDim; ++b)
      rho(a, b) = psi.c[a] * std::conj(psi.c[b]);
  return rho;
}

namespace {

void accumulate(DensityMatrix& rho, const DensityMatrix& part, double w) {
  for (int k = 0; k < kDensityEntries; ++k) rho.m[k] += w * part.m[k];
}

void require_weight(double w, const char* name) {
  if (!std::isfinite(w) || w < 0.0)
    throw std::invalid_argument(std::string("negative mixture weight: ") + name);
}

} // namespace

DensityMatrix make_density(const ScenarioSpec& spec) {
  if (spec.family != Family::FromFile) {
    if (!std::isfinite(spec.p) || spec.p < 0.0 || spec.p > 1.0)
      throw std::invalid_argument("mixing weight p must lie in [0, 1]");
  }

  DensityMatrix rho;
  switch (spec.family) {
    case Family::GhzW: {
      accumulate(rho, pure_projector(make_pure(Ghz{})), spec.p);
      accumulate(rho, pure_projector(make_pure(W{})), 1.0 - spec.p);
      break;
    }
    case Family::GGhzGW: {
      if (std::abs(spec.a) > 1.0)
        throw std::invalid_argument("|a| must not exceed 1");
      const double cc = spec.c * spec.c + spec.d * spec.d;
      if (cc > 1.0)
        throw std::invalid_argument("c^2 + d^2 must not exceed 1");
      const double b = std::sqrt(1.0 - spec.a * spec.a);
      const double f = std::sqrt(1.0 - cc);
      accumulate(rho, pure_projector(make_pure(GeneralizedGhz{spec.a, b})), spec.p);
      accumulate(rho, pure_projector(make_pure(GeneralizedW{spec.c, spec.d, f})),
                 1.0 - spec.p);
      break;
    }
    case Family::GhzWFlipW: {
      if (!(spec.n > 0.0))
        throw std::invalid_argument("n must be positive");
      const double q = (1.0 - spec.p) / spec.n;
      const double r = 1.0 - spec.p - q;
      require_weight(spec.p, "p");
      require_weight(q, "q = (1-p)/n");
      require_weight(r, "1-p-q");
      accumulate(rho, pure_projector(make_pure(Ghz{})), spec.p);
      accumulate(rho, pure_projector(make_pure(W{})), q);
      accumulate(rho, pure_projector(make_pure(FlippedW{})), r);
      break;
    }
    case Family::GhzNoise: {
      accumulate(rho, pure_projector(make_pure(Ghz{})), spec.p);
      const double w = (1.0 - spec.p) / 8.0;
      for (int a = 0; a < kBasisDim; ++a) rho(a, a) += w;
      break;
    }
    case Family::FromFile:
      return load_density_file(spec.path);
  }
  return rho;
}

DensityDiagnostics validate_density(const DensityMatrix& rho) {
  DensityDiagnostics diag;
  for (int a = 0; a < kBasisDim; ++a)
    for (int b = 0; b < kBasisDim; ++b)
      diag.hermiticity_dev = std::max(
          diag.hermiticity_dev, std::abs(rho(a, b) - std::conj(rho(b, a))));
  diag.trace_dev = std::abs(rho.trace_real() - 1.0);

  Eigen::Matrix<std::complex<double>, kBasisDim, kBasisDim> h;
  for (int a = 0; a < kBasisDim; ++a)
    for (int b = 0; b < kBasisDim; ++b)
      h(a, b) = 0.5 * (rho(a, b) + std::conj(rho(b, a)));
  Eigen::SelfAdjointEigenSolver<decltype(h)> solver(h, Eigen::EigenvaluesOnly);
  const auto& ev = solver.eigenvalues();
  diag.min_eigenvalue = ev.minCoeff();
  diag.rank = 0;
  for (int k = 0; k < kBasisDim; ++k)
    if (ev[k] > kRankEps) ++diag.rank;
  return diag;
}

} // namespace tangle
