#pragma once

#include "ustab/market.hpp"

namespace ustab {

// Coefficients of E[exp(a V_T + b int_0^T V dt)].
struct AffineMomentQuery {
  double a = 0.0;
  double b = 0.0;
};

struct RiccatiOptions {
  double rtol = 1e-10;
  double atol = 1e-14;
  double explosion_threshold = 1e8;
  int max_steps = 1000000;
};

// exp(A(T) + C(T) V_0) with C' = -kappa C + sigma^2 C^2 / 2 + b, C(0) = a and
// A' = kappa theta C, A(0) = 0, integrated by adaptive Dormand-Prince 5(4).
// Throws MomentExplosion if |C| or |A| exceeds the threshold before T.
double affine_exponential_moment(const HestonParams& params, const AffineMomentQuery& q,
                                 const RiccatiOptions& opts = {});

// E[Z_T^q] for the minimal martingale density of S^rho, q real, reduced to an
// affine moment through int sqrt(V) dB = (V_T - V_0 - kappa theta T + kappa int V dt) / sigma.
double mmm_density_moment(const HestonParams& params, double q, const RiccatiOptions& opts = {});

}  // namespace ustab
