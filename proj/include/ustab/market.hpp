#pragma once

#include "ustab/claim.hpp"
#include "ustab/rng.hpp"
#include "ustab/types.hpp"

#include <cmath>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace ustab {

// dS = mu V dt + sqrt(V) (sqrt(1 - rho^2) dB + rho dW)
// dV = kappa (theta - V) dt + sigma sqrt(V) dB
// Construction enforces 2 kappa theta >= sigma^2 and |rho| < 1.
class HestonParams {
 public:
  HestonParams(double mu, double kappa, double theta, double sigma, double v0, double rho,
               double horizon);

  double mu() const { return mu_; }
  double kappa() const { return kappa_; }
  double theta() const { return theta_; }
  double sigma() const { return sigma_; }
  double v0() const { return v0_; }
  double rho() const { return rho_; }
  double horizon() const { return horizon_; }

  HestonParams with_rho(double rho) const;
  HestonParams with_mu(double mu) const;
  // E[V_t] and E[int_0^t V ds] of the exact CIR process.
  double mean_variance(double t) const;
  double mean_integrated_variance(double t) const;

 private:
  double mu_, kappa_, theta_, sigma_, v0_, rho_, horizon_;
};

// Uniform grid 0 = t_0 < ... < t_N = T.
class TimeGrid {
 public:
  TimeGrid(int steps, double horizon);

  int steps() const { return steps_; }
  double horizon() const { return horizon_; }
  double dt() const { return horizon_ / steps_; }
  double time(int k) const { return k == steps_ ? horizon_ : horizon_ * k / steps_; }

 private:
  int steps_;
  double horizon_;
};

// Node values on paths x (N + 1); dS holds the N price increments so that
// S = cumulative sum of dS exactly.  V is the instantaneous price variance
// per unit time.  Bundles built from general markets carry no Heston params.
struct PathBundle {
  TimeGrid grid;
  std::optional<HestonParams> params;
  double rho = 0.0;
  std::uint64_t seed = 0;
  PathMatrix B, W, V, S, Z, dS;

  Index paths() const { return B.rows(); }
  int steps() const { return grid.steps(); }
};

// f = phi(B_T) (or phi(W_T)) per path.
VectorXd claim_payoffs(const ClaimSpec& claim, const PathBundle& bundle);

PathMatrix simulate_cir(const HestonParams& params, const TimeGrid& grid, const RandomStream& stream,
                        Index paths);

PathBundle simulate_heston_market(const HestonParams& params, const TimeGrid& grid,
                                  const RandomStream& stream, Index paths);

// Terminal values only; bit-identical to the corresponding bundle columns.
struct HestonTerminals {
  VectorXd B, W, V, S, Z;
  VectorXd integrated_variance;  // left-point sum of V dt
  VectorXd price_qv;             // sum of squared price increments
};

HestonTerminals simulate_heston_terminals(const HestonParams& params, const TimeGrid& grid,
                                          const RandomStream& stream, Index paths);

// Discrete stochastic exponential of (integrand . driver), node by node:
// log increments theta dM - theta^2 d<M> / 2 with d<M> = dM^2 expectation
// given by driver_variance per step.  All arrays are paths x N except the
// output, which is paths x (N + 1).
template <typename Scalar>
PathMatrixX<Scalar> stochastic_exponential(const PathMatrixX<Scalar>& integrand,
                                           const PathMatrixX<Scalar>& driver_increments,
                                           const PathMatrixX<Scalar>& driver_variance) {
  if (integrand.rows() != driver_increments.rows() || integrand.cols() != driver_increments.cols() ||
      integrand.rows() != driver_variance.rows() || integrand.cols() != driver_variance.cols()) {
    throw std::invalid_argument("stochastic_exponential: nonconformant arrays");
  }
  const PathMatrixX<Scalar> log_step =
      integrand.cwiseProduct(driver_increments) -
      Scalar(0.5) * integrand.cwiseAbs2().cwiseProduct(driver_variance);
  PathMatrixX<Scalar> out(integrand.rows(), integrand.cols() + 1);
  for (Index i = 0; i < integrand.rows(); ++i) {
    Scalar acc(0);
    out(i, 0) = Scalar(1);
    for (Index k = 0; k < integrand.cols(); ++k) {
      acc += log_step(i, k);
      out(i, k + 1) = std::exp(acc);
    }
  }
  return out;
}

// Same with a deterministic per-step driver variance.
template <typename Scalar>
PathMatrixX<Scalar> stochastic_exponential(const PathMatrixX<Scalar>& integrand,
                                           const PathMatrixX<Scalar>& driver_increments,
                                           Scalar step_variance) {
  return stochastic_exponential<Scalar>(
      integrand, driver_increments,
      PathMatrixX<Scalar>::Constant(integrand.rows(), integrand.cols(), step_variance));
}

// Density of the minimal martingale measure for S^rho,
// Z = E(-mu sqrt(V) . (sqrt(1 - rho^2) B + rho W)), on all nodes.
PathMatrix minimal_martingale_density_paths(const PathBundle& bundle, const HestonParams& params);
VectorXd minimal_martingale_density(const PathBundle& bundle, const HestonParams& params);

// Predictable integrands with |theta| <= 1 used to probe the semimartingale
// distance from below.
enum class AdversaryRule { kPlusOne, kMinusOne, kPreviousIncrementSign, kRunningValueSign };

std::vector<AdversaryRule> default_adversaries();
std::string to_string(AdversaryRule rule);

struct DistanceEstimate {
  Estimate best;
  AdversaryRule argmax = AdversaryRule::kPlusOne;
  std::vector<Estimate> per_rule;
};

// max over rules of the MC estimate of E[|(theta . (X - Y))_T| ^ 1].
DistanceEstimate semimartingale_distance(const PathMatrix& X, const PathMatrix& Y,
                                         const std::vector<AdversaryRule>& adversaries);

}  // namespace ustab
