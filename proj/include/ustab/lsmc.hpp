#pragma once

#include "ustab/primal.hpp"

#include <string>
#include <vector>

namespace ustab {

struct ResidualReport {
  double price = 0.0;  // regression intercept
  double mean = 0.0;   // of price + X_T - f
  double variance = 0.0;
  double sd = 0.0;
  Index rank = 0;
  Index columns = 0;
  std::vector<std::string> warnings;
};

struct LsmcHedge {
  StrategySpec strategy;
  ResidualReport report;
};

// Single least-squares fit of f on [1, bucket gains sum_k phi_j(k) dS_k],
// rank-revealing QR; columns beyond the numerical rank are dropped with a
// warning.  Constant claims return zero holdings and an exact price.
LsmcHedge lsmc_hedge(const ClaimSpec& claim, const PathBundle& bundle, const RegressionBasis& basis);

// Residual price + X_T - f of an untruncated strategy on any bundle.
ResidualReport hedge_residual(const StrategySpec& strategy, double price, const ClaimSpec& claim,
                              const PathBundle& bundle);

}  // namespace ustab
