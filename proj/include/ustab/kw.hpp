#pragma once

#include "ustab/general_market.hpp"
#include "ustab/types.hpp"

#include <functional>
#include <span>
#include <string>
#include <vector>

namespace ustab {

// Node-wise projection of dL = nu . dB onto dM = sigma . dB:
//   H = nu . sigma / |sigma|^2 (0 where sigma = 0), dL' = (nu - H sigma) . dB.
struct ProjectionResult {
  PathMatrix H;             // paths x N
  PathMatrix residual;      // increments of L', paths x N
  VectorXd projected_qv;    // per path: sum H^2 |sigma|^2 dt
  VectorXd residual_qv;     // per path: sum |nu - H sigma|^2 dt
  Estimate energy;          // E[<H . M>_T]
};

// nu, sigma, dB: d arrays each, paths x N.
ProjectionResult kw_decompose(const std::vector<PathMatrix>& nu, const std::vector<PathMatrix>& sigma,
                              const std::vector<PathMatrix>& dB, double dt);

// nu(t, B_t) -> d-vector, evaluated on the driver paths.
using IntegrandFn = std::function<void(double t, std::span<const double> b, std::span<double> out)>;

struct EnergyPoint {
  double n = 0.0;
  Estimate energy;
  double zero_cell_fraction = 0.0;
};

// E[<H^n . M^n>_T] for each n on shared driver paths.  Requires
// |nu . sigma^inf| < 1e-10 on every cell.
std::vector<EnergyPoint> kw_convergence_diag(const GeneralMarketCoeffs& coeffs, const IntegrandFn& nu,
                                             const TimeGrid& grid, const RandomStream& stream,
                                             Index paths, const std::vector<double>& n_list);

// Fraction of (path, step) cells with |sigma| = 0 exactly.
double nondegeneracy_check(const std::vector<PathMatrix>& sigma);

// nu evaluated along general-market driver paths (d arrays, paths x N).
std::vector<PathMatrix> evaluate_integrand(const IntegrandFn& nu, const GeneralMarketPaths& market);

// A two-driver market family with an integrand orthogonal to its limit.
struct KwFamily {
  GeneralMarketCoeffs coeffs;
  IntegrandFn nu;
};

// "nondegenerate": sigma^n = (1 + sin(b1) / 2, cos(b2) / n), nu = (0, 1);
// the limit keeps |sigma| >= 1/2 and the projected energy decays like 1/n^2.
// "degenerate": sigma^n = (1/n, 0), nu = (1, 0); the limit vanishes and the
// projected energy is T for every n.
KwFamily kw_family(const std::string& name);

}  // namespace ustab
