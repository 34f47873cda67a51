#include "tangle/roof.hpp"

#include <cmath>
#include <stdexcept>

namespace tangle {

namespace {
constexpr double kSkipRenorm = 0x1.0p-48;
} // namespace

void check_decomposition(const Decomposition& dec) {
  if (dec.weights.empty() || dec.weights.size() != dec.states.size())
    throw std::invalid_argument("decomposition weight/state count mismatch");
  double sum = 0.0;
  for (double w : dec.weights) {
    if (!(w >= 0.0))
      throw std::invalid_argument("decomposition has a negative weight");
    sum += w;
  }
  if (std::abs(sum - 1.0) > kNormTol)
    throw std::invalid_argument("decomposition weights do not sum to 1");
  for (const auto& s : dec.states) {
    if (std::abs(s.norm_sq() - 1.0) > kNormTol)
      throw std::invalid_argument("decomposition member state is not unit norm");
  }
}

DensityMatrix realized_density(const Decomposition& dec) {
  check_decomposition(dec);
  DensityMatrix rho;
  for (int i = 0; i < dec.np(); ++i) {
    const double w = dec.weights[i];
    const auto& c = dec.states[i].c;
    for (int a = 0; a < kBasisDim; ++a)
      for (int b = 0; b < kBasisDim; ++b)
        rho(a, b) += w * c[a] * std::conj(c[b]);
  }
  return rho;
}

double residual_r2(const Decomposition& dec, const DensityMatrix& target) {
  const DensityMatrix real = realized_density(dec);
  double acc = 0.0;
  for (int k = 0; k < kDensityEntries; ++k)
    acc += std::norm(real.m[k] - target.m[k]);
  return acc;
}

double average_tangle(const Decomposition& dec) {
  check_decomposition(dec);
  double acc = 0.0;
  for (int i = 0; i < dec.np(); ++i)
    acc += dec.weights[i] * three_tangle_pure(dec.states[i]);
  return acc;
}

double energy(const Decomposition& dec, const EnergyParams& params) {
  return average_tangle(dec) + params.kappa * residual_r2(dec, params.target);
}

Decomposition normalize(Decomposition dec) {
  if (dec.weights.empty() || dec.weights.size() != dec.states.size())
    throw std::invalid_argument("decomposition weight/state count mismatch");
  double sum = 0.0;
  for (double w : dec.weights) {
    if (!(w >= 0.0))
      throw std::invalid_argument("cannot normalize negative weights");
    sum += w;
  }
  if (!(sum > 0.0))
    throw std::invalid_argument("cannot normalize: all weights are zero");
  if (std::abs(sum - 1.0) > kSkipRenorm) {
    const double inv = 1.0 / sum;
    for (double& w : dec.weights) w *= inv;
  }
  for (auto& s : dec.states) s = s.normalized();
  return dec;
}

Decomposition random_decomposition(int np, Rng& rng) {
  if (np < 1) throw std::invalid_argument("np must be at least 1");
  Decomposition dec;
  dec.weights.resize(np);
  dec.states.resize(np);
  for (int i = 0; i < np; ++i) dec.weights[i] = -std::log(1.0 - rng.u01());
  for (auto& s : dec.states) {
    for (auto& a : s.c) {
      const double re = rng.normal();
      const double im = rng.normal();
      a = Amp(re, im);
    }
  }
  return normalize(std::move(dec));
}

} // namespace tangle
