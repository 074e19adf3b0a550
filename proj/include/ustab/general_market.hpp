#pragma once

#include "ustab/market.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ustab {

// dS^n = lambda^n |sigma^n|^2 dt + sigma^n . dB on a d-dimensional Brownian
// motion.  The market index n is a double; n = +inf is the limit market.
struct GeneralMarketCoeffs {
  int dimension = 1;
  // Writes sigma^n(t, B_t) into out (length d).
  std::function<void(double n, double t, std::span<const double> b, std::span<double> out)> sigma;
  // lambda^n(t, B_t)
  std::function<double(double n, double t, std::span<const double> b)> lambda;
  std::string name;
};

struct GeneralMarketPaths {
  TimeGrid grid;
  double n = 0.0;
  int dimension = 1;
  std::vector<PathMatrix> B;      // d arrays, paths x (N + 1)
  std::vector<PathMatrix> dB;     // d arrays, paths x N
  std::vector<PathMatrix> sigma;  // d arrays, paths x N, left endpoints
  PathMatrix lambda;              // paths x N, left endpoints
  PathMatrix S, M;                // paths x (N + 1)
  PathMatrix dS, dM;              // paths x N

  Index paths() const { return S.rows(); }
};

GeneralMarketPaths simulate_general_market(const GeneralMarketCoeffs& coeffs, double n,
                                           const TimeGrid& grid, const RandomStream& stream,
                                           Index paths);

// One-dimensional price view of a general market as a PathBundle: B is the
// first driver, W the second (zero when d = 1), V = |sigma|^2 and
// Z = E(-lambda . M).
PathBundle to_path_bundle(const GeneralMarketPaths& market, std::uint64_t seed);

// sigma^n = 1/n, lambda = 0: the degenerate family with S^n = B / n.
GeneralMarketCoeffs scaled_brownian_family();

}  // namespace ustab
