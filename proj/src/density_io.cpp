#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "tangle/errors.hpp"
#include "tangle/qstate.hpp"

namespace tangle {

namespace {

std::string strip_comment(const std::string& line) {
  const auto pos = line.find('#');
  return pos == std::string::npos ? line : line.substr(0, pos);
}

bool blank(const std::string& s) {
  return s.find_first_not_of(" \t\r\n") == std::string::npos;
}

} // namespace

DensityMatrix load_density_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw FileFormatError("cannot open density file: " + path);

  std::string line;
  int lineno = 0;
  bool have_dim = false;
  std::array<bool, kDensityEntries> seen{};
  DensityMatrix rho;
  int entries = 0;

  while (std::getline(in, line)) {
    ++lineno;
    const std::string body = strip_comment(line);
    if (blank(body)) continue;
    std::istringstream ss(body);

    if (!have_dim) {
      int dim = 0;
      if (!(ss >> dim))
        throw FileFormatError(path + ":" + std::to_string(lineno) +
                              ": expected integer dimension");
      if (dim != kBasisDim)
        throw FileFormatError(path + ":" + std::to_string(lineno) +
                              ": dimension must be 8, got " + std::to_string(dim));
      std::string extra;
      if (ss >> extra)
        throw FileFormatError(path + ":" + std::to_string(lineno) +
                              ": trailing tokens after dimension");
      have_dim = true;
      continue;
    }

    int row = -1, col = -1;
    double re = 0.0, im = 0.0;
    if (!(ss >> row >> col >> re >> im))
      throw FileFormatError(path + ":" + std::to_string(lineno) +
                            ": expected \"row col re im\"");
    std::string extra;
    if (ss >> extra)
      throw FileFormatError(path + ":" + std::to_string(lineno) +
                            ": trailing tokens after entry");
    if (row < 0 || row >= kBasisDim || col < 0 || col >= kBasisDim)
      throw FileFormatError(path + ":" + std::to_string(lineno) +
                            ": indices out of range [0, 7]");
    if (!std::isfinite(re) || !std::isfinite(im))
      throw FileFormatError(path + ":" + std::to_string(lineno) +
                            ": non-finite entry");
    const int k = kBasisDim * row + col;
    if (seen[k])
      throw FileFormatError(path + ":" + std::to_string(lineno) + ": entry (" +
                            std::to_string(row) + "," + std::to_string(col) +
                            ") listed twice");
    seen[k] = true;
    rho.m[k] = Amp(re, im);
    ++entries;
  }

  if (!have_dim) throw FileFormatError(path + ": empty file");
  if (entries != kDensityEntries) {
    for (int k = 0; k < kDensityEntries; ++k) {
      if (!seen[k])
        throw FileFormatError(path + ": missing entry (" +
                              std::to_string(k / kBasisDim) + "," +
                              std::to_string(k % kBasisDim) +
                              "); all 64 entries are required");
    }
  }

  const DensityDiagnostics diag = validate_density(rho);
  if (!diag.hermitian_ok())
    throw FileFormatError(path + ": matrix is not Hermitian, max deviation " +
                          std::to_string(diag.hermiticity_dev) +
                          " exceeds 1e-12");
  if (!diag.trace_ok())
    throw FileFormatError(path + ": trace deviates from 1 by " +
                          std::to_string(diag.trace_dev) + ", exceeds 1e-12");
  if (!diag.psd_ok())
    throw FileFormatError(path + ": matrix is not positive semidefinite, " +
                          "smallest eigenvalue " +
                          std::to_string(diag.min_eigenvalue) +
                          " is below -1e-10");
  return rho;
}

void write_density_file(const std::string& path, const DensityMatrix& rho) {
  std::ofstream out(path);
  if (!out) throw FileFormatError("cannot write density file: " + path);
  out << kBasisDim << "\n";
  char buf[96];
  for (int a = 0; a < kBasisDim; ++a) {
    for (int b = 0; b < kBasisDim; ++b) {
      std::snprintf(buf, sizeof buf, "%d %d %.17g %.17g\n", a, b,
                    rho(a, b).real(), rho(a, b).imag());
      out << buf;
    }
  }
}

} // namespace tangle
