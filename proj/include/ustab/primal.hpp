#pragma once

#include "ustab/claim.hpp"
#include "ustab/market.hpp"
#include "ustab/utility.hpp"

#include <memory>
#include <span>
#include <string>

namespace ustab {

// Hedge basis: at node k with state (B, V), feature (a, b) is
//   He_a(z) V^b / (sqrt(tau) sqrt(V)),  z = clip(B / sqrt(tau)),
// with He_a the normalized probabilists' Hermite polynomials and
// tau = T - t_k + dt.  Coefficients are shared within each time bucket.
struct RegressionBasis {
  int degree_b = 2;
  int degree_v = 2;
  int buckets = 8;
  double z_clip = 4.0;

  int size() const { return (degree_b + 1) * (degree_v + 1); }
  void validate(const TimeGrid& grid) const;
};

void regression_features(const RegressionBasis& basis, const TimeGrid& grid, int k, double b,
                         double v, std::span<double> out);
int bucket_of_step(int k, int steps, int buckets);

enum class StrategyKind { kConstant, kStateLinear, kRegression, kProportional };

// Magnitude truncation and wealth floor -K - delta.
struct Admissibility {
  double floor = 1e3;           // K > 0
  double slack = 1e-3;          // delta > 0
  double holding_bound = 1e6;   // |H| above this is zeroed
};

// Holdings H_k = own(k) + overlay_scale * overlay(k).
//   constant:     coeffs = [c]
//   state-linear: coeffs = [c0, c1, c2] on (1, V_k, B_k)
//   regression:   coeffs = buckets * basis.size() values, bucket-major
//   proportional: coeffs = [a, g0, g1]; with g_k = g0 + g1 t_k,
//                 H_k = (capital + a) g_k prod_{j<k} (1 + g_j dS_j),
//                 i.e. the fraction g_k of a self-financing sub-account
//                 started from capital + a.
struct StrategySpec {
  StrategyKind kind = StrategyKind::kConstant;
  VectorXd coeffs = VectorXd::Zero(1);
  RegressionBasis basis;
  std::shared_ptr<const StrategySpec> overlay;
  double overlay_scale = 1.0;
  Admissibility admissibility;

  static StrategySpec constant(double c);
  static StrategySpec state_linear(double c0, double c1, double c2);
  static StrategySpec proportional(double a, double g0, double g1);
  std::string id() const;
};

int coefficient_count(StrategyKind kind, const RegressionBasis& basis);

// Raw holdings on one path (N values), before truncation.  capital is the
// initial wealth seen by proportional components.
void holdings_row(const StrategySpec& spec, const PathBundle& bundle, Index path,
                  std::span<double> out, double capital = 0.0);
PathMatrix strategy_holdings(const StrategySpec& spec, const PathBundle& bundle, double capital = 0.0);

// X_0 = 0, X_{k+1} = X_k + H_k dS_k.
template <typename Scalar>
PathMatrixX<Scalar> wealth_process(const PathMatrixX<Scalar>& H, const PathMatrixX<Scalar>& dS) {
  if (H.rows() != dS.rows() || H.cols() != dS.cols()) {
    throw std::invalid_argument("wealth_process: nonconformant arrays");
  }
  PathMatrixX<Scalar> X(H.rows(), H.cols() + 1);
  X.col(0).setZero();
  for (Index k = 0; k < H.cols(); ++k) X.col(k + 1) = X.col(k) + H.col(k).cwiseProduct(dS.col(k));
  return X;
}
PathMatrix wealth_process(const StrategySpec& spec, const PathBundle& bundle);

struct AdmissibleWealth {
  PathMatrix H;             // truncated, zero after the stop
  PathMatrix X;             // >= level on every node
  Eigen::VectorXi stop_step;  // step during which the floor was hit, -1 if never
  double stopped_fraction = 0.0;
};

// Truncates holdings, then stops wealth at the first continuous-time crossing
// of -K - delta.  Within a step the wealth is Brownian with constant holdings;
// crossings between nodes are drawn from the bridge hitting probability on
// the bundle seed's primal-bridge substream.  Stopped wealth sits exactly on
// the floor.
AdmissibleWealth enforce_admissibility(const StrategySpec& spec, const PathBundle& bundle,
                                       double floor, double slack);

struct PrimalResult {
  Estimate estimate;
  std::int64_t violations = 0;  // paths with x + X_T + f < 0
  double stopped_fraction = 0.0;
  std::string strategy_id;
};

// MC mean of U(x + f + X_T) under the admissibility stop.  Halfline
// utilities additionally stop wealth at x + X >= -phi_max (a necessary
// condition for x + X_T + f >= 0), or at x + X >= -phi_min when constrained;
// whole-line utilities apply the -phi_min floor only when constrained.
PrimalResult primal_bound(double x, const StrategySpec& strategy, const ConjugatePair& pair,
                          const ClaimSpec* claim, const PathBundle& bundle, bool constrained);

// A prototype strategy with a coefficient box; if the prototype has an
// overlay, the last box coordinate is the overlay scale.
struct StrategyFamily {
  StrategySpec prototype;
  VectorXd lo;
  VectorXd hi;

  Index dimension() const;
  StrategySpec at(const VectorXd& v) const;
};

struct PrimalOptimum {
  StrategySpec strategy;
  VectorXd coefficients;
  PrimalResult result;
  int evaluations = 0;
};

// Nelder-Mead maximization of the primal bound from the projection of 0
// (or of start when given); -inf bounds count as worst.
PrimalOptimum optimize_primal(double x, const ConjugatePair& pair, const ClaimSpec* claim,
                              const PathBundle& bundle, const StrategyFamily& family, int budget,
                              bool constrained, const VectorXd* start = nullptr);

}  // namespace ustab
