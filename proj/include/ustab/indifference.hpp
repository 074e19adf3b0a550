#pragma once

#include "ustab/dual.hpp"
#include "ustab/lsmc.hpp"
#include "ustab/primal.hpp"

#include <optional>
#include <string>
#include <vector>

namespace ustab {

// How a value function is bounded from below: a strategy family searched
// with a fixed budget from a start point (0 evaluates only the start).
struct PrimalSettings {
  StrategyFamily family;
  int budget = 0;
  bool constrained = false;
  VectorXd start;  // empty means the projection of 0
};

PrimalOptimum best_primal(double x, const ConjugatePair& pair, const ClaimSpec* claim,
                          const PathBundle& bundle, const PrimalSettings& settings);

struct BisectionSettings {
  double tolerance = 1e-3;
  int max_iterations = 60;
  double noise_sigmas = 3.0;
};

struct PriceResult {
  double p = 0.0;
  double bracket_width = 0.0;
  Estimate u;  // at x with the claim
  Estimate w;  // at x + p without it
  int iterations = 0;
  bool noise_floor = false;   // stopped because |w - u| <= noise_sigmas * combined SE
  bool within_noise = false;  // the termination invariant holds at p
  std::string diagnosis;
};

// Bisection of p -> w(x + p) - u(x) on [phi_min, phi_max].  u_known skips
// the u-side search when it has already been done on the same bundle.
PriceResult indifference_price(double x, const PrimalSettings& u_settings,
                               const PrimalSettings& w_settings, const ClaimSpec& claim,
                               const ConjugatePair& pair, const BisectionSettings& solver,
                               const PathBundle& bundle, const PrimalOptimum* u_known = nullptr);

struct SweepConfig {
  HestonParams market;
  std::vector<double> rhos;
  std::vector<double> xs;
  std::vector<double> ys;
  ClaimSpec claim;
  UtilitySpec utility;
  int steps = 256;
  Index paths = 20000;
  std::uint64_t seed = 1;
  int primal_budget = 30;
  int dual_budget = 20;
  int dual_buckets = 1;
  double dual_box = 1.0;
  double dual_cap = 10.0;
  double strategy_box = 2.0;
  RegressionBasis hedge_basis;
  BisectionSettings bisection;
  Admissibility admissibility;

  void validate() const;
};

struct PrimalRow {
  double x, rho;
  bool constrained;
  std::string strategy_id;
  Estimate estimate;
  std::int64_t violations;
  double stopped_fraction;
};

struct DualRow {
  double y, rho;
  std::string candidate_id;
  Estimate estimate;
};

struct PriceRow {
  double x, rho;
  PriceResult price;
  double se = 0.0;  // delta-method standard error of p
};

// The bound sandwich at one (x, rho): u_hat bounds u(x, rho) from below
// (unconstrained at rho = 0, constrained otherwise, where the constraint is
// implied by admissibility), cap = min over y of E[V_c(y Z^0_T, f)] + xy bounds
// the constrained value from above.
struct SummaryRow {
  double x, rho;
  Estimate u_hat;
  Estimate u_c_hat;  // constrained bound in the rho = 0 market
  Estimate cap;
  double cap_y;
  double excess;     // u_hat - cap
  double excess_se;
  double price_gap;  // p(x, 0) - p(x, rho)
  double price_gap_se;
};

struct SweepTable {
  std::vector<PrimalRow> primal;
  std::vector<DualRow> dual;
  std::vector<PriceRow> prices;
  std::vector<SummaryRow> summary;
  std::vector<std::string> warnings;
};

SweepTable rho_sweep(const SweepConfig& cfg);

struct DegenerateSettings {
  int steps = 256;
  Index paths = 20000;
  std::uint64_t seed = 1;
  RegressionBasis basis{8, 0, 4, 4.0};
  int budget = 16;
};

struct DegenerateRow {
  double n;
  Estimate hedged;
  double analytic_un;
  double analytic_uinf;
  Estimate mc_uinf;
  double analytic_gap;
  double hedge_residual_sd;
};

// Exponential utility, claim 1{B_T >= 0}, markets S^n = B / n.
std::vector<DegenerateRow> degenerate_example(const std::vector<double>& n_list, double alpha,
                                              double x, const DegenerateSettings& settings);

}  // namespace ustab
