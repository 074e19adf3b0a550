#pragma once

#include "ustab/claim.hpp"
#include "ustab/market.hpp"
#include "ustab/utility.hpp"

#include <string>

namespace ustab {

// Orthogonal perturbation dL = nu dW_perp with W_perp = sqrt(1 - rho^2) W - rho B
// and nu piecewise constant over equal time buckets, linear in (1, V, B).
// E(L) is stopped at the cap on first (continuous-time) crossing.
struct DualCandidate {
  int buckets = 1;
  Eigen::MatrixXd coeffs = Eigen::MatrixXd::Zero(1, 3);  // buckets x {1, V, B}
  double cap = 10.0;                                    // > 1

  static DualCandidate zero(int buckets, double cap);
  std::string id() const;
};

// E(L) on every node; values lie in (0, cap].  Crossings within a step are
// detected by the Brownian-bridge hitting probability, drawn from the
// bundle seed's dual-bridge substream, so all candidates share randomness.
PathMatrix candidate_density_paths(const PathBundle& bundle, const DualCandidate& candidate);
VectorXd candidate_density(const PathBundle& bundle, const DualCandidate& candidate);

// Per-sample dual integrand: V_c(yD, f) for halfline utilities with a claim,
// V(yD) + yDf otherwise (f = 0 without claim).
double dual_integrand(const ConjugatePair& pair, const ClaimSpec* claim, double y, double density,
                      double payoff);

// MC mean of the dual integrand against terminal densities D.  Throws
// std::domain_error on NaN or -inf samples.
Estimate dual_bound_density(double y, const ConjugatePair& pair, const ClaimSpec* claim,
                            const VectorXd& payoffs, const VectorXd& densities);

Estimate dual_bound_mmm(double y, const ConjugatePair& pair, const ClaimSpec* claim,
                        const PathBundle& bundle);

Estimate dual_bound_perturbed(double y, const ConjugatePair& pair, const ClaimSpec* claim,
                              const PathBundle& bundle, const DualCandidate& candidate);

struct DualFamily {
  int buckets = 1;
  Eigen::MatrixXd lo;  // buckets x 3
  Eigen::MatrixXd hi;
  double cap = 10.0;
};

struct DualOptimum {
  DualCandidate candidate;
  Estimate estimate;
  int evaluations = 0;
};

// Nelder-Mead over the family's coefficient box from the projection of 0.
DualOptimum minimize_dual(double y, const ConjugatePair& pair, const ClaimSpec* claim,
                          const PathBundle& bundle, const DualFamily& family, int budget);

// E[phi(B_T - B_{T'} + x)]: the conditional claim value after handing the
// price over to the orthogonal driver at T'.  Off-grid T' is bridged.
Estimate subreplication_estimate(const HestonParams& params, const ClaimSpec& claim, double x,
                                 double t_prime, const PathBundle& bundle);

}  // namespace ustab
