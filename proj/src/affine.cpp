#include "ustab/affine.hpp"

#include "ustab/errors.hpp"

#include <algorithm>
#include <array>
#include <cmath>

namespace ustab {

namespace {

using State = std::array<double, 2>;  // (C, A)

State rhs(const HestonParams& p, double b, const State& y) {
  const double c = y[0];
  return {-p.kappa() * c + 0.5 * p.sigma() * p.sigma() * c * c + b, p.kappa() * p.theta() * c};
}

State axpy(const State& y, double h, std::initializer_list<std::pair<double, const State*>> terms) {
  State out = y;
  for (const auto& [coef, k] : terms) {
    out[0] += h * coef * (*k)[0];
    out[1] += h * coef * (*k)[1];
  }
  return out;
}

}  // namespace

double affine_exponential_moment(const HestonParams& p, const AffineMomentQuery& q,
                                 const RiccatiOptions& opts) {
  if (q.a == 0.0 && q.b == 0.0) return 1.0;
  const double T = p.horizon();
  State y = {q.a, 0.0};
  double t = 0.0;
  double h = std::min(T, 1e-3);
  for (int step = 0; step < opts.max_steps && t < T; ++step) {
    h = std::min(h, T - t);
    const State k1 = rhs(p, q.b, y);
    const State k2 = rhs(p, q.b, axpy(y, h, {{1.0 / 5, &k1}}));
    const State k3 = rhs(p, q.b, axpy(y, h, {{3.0 / 40, &k1}, {9.0 / 40, &k2}}));
    const State k4 = rhs(p, q.b, axpy(y, h, {{44.0 / 45, &k1}, {-56.0 / 15, &k2}, {32.0 / 9, &k3}}));
    const State k5 = rhs(p, q.b,
                         axpy(y, h,
                              {{19372.0 / 6561, &k1},
                               {-25360.0 / 2187, &k2},
                               {64448.0 / 6561, &k3},
                               {-212.0 / 729, &k4}}));
    const State k6 = rhs(p, q.b,
                         axpy(y, h,
                              {{9017.0 / 3168, &k1},
                               {-355.0 / 33, &k2},
                               {46732.0 / 5247, &k3},
                               {49.0 / 176, &k4},
                               {-5103.0 / 18656, &k5}}));
    const State y5 = axpy(y, h,
                          {{35.0 / 384, &k1},
                           {500.0 / 1113, &k3},
                           {125.0 / 192, &k4},
                           {-2187.0 / 6784, &k5},
                           {11.0 / 84, &k6}});
    const State k7 = rhs(p, q.b, y5);
    const State y4 = axpy(y, h,
                          {{5179.0 / 57600, &k1},
                           {7571.0 / 16695, &k3},
                           {393.0 / 640, &k4},
                           {-92097.0 / 339200, &k5},
                           {187.0 / 2100, &k6},
                           {1.0 / 40, &k7}});
    double err = 0.0;
    for (int i = 0; i < 2; ++i) {
      const double scale = opts.atol + opts.rtol * std::max(std::abs(y[i]), std::abs(y5[i]));
      err = std::max(err, std::abs(y5[i] - y4[i]) / scale);
    }
    if (!std::isfinite(err)) {
      h *= 0.2;
    } else if (err <= 1.0) {
      t += h;
      y = y5;
      if (std::abs(y[0]) > opts.explosion_threshold || std::abs(y[1]) > opts.explosion_threshold) {
        throw MomentExplosion("affine moment explodes before the horizon");
      }
      h *= std::min(5.0, std::max(0.2, 0.9 * std::pow(std::max(err, 1e-300), -0.2)));
    } else {
      h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
    }
    if (h < 1e-14 * T) throw MomentExplosion("affine moment step size collapsed before the horizon");
  }
  if (t < T) throw MomentExplosion("affine moment integration did not reach the horizon");
  return std::exp(y[1] + y[0] * p.v0());
}

double mmm_density_moment(const HestonParams& p, double q, const RiccatiOptions& opts) {
  const double mu = p.mu(), rho = p.rho();
  const double c = std::sqrt(1.0 - rho * rho);
  // log Z = -mu c int sqrt(V) dB - mu rho int sqrt(V) dW - mu^2 / 2 int V dt
  AffineMomentQuery query;
  query.a = -q * mu * c / p.sigma();
  query.b = -q * mu * c * p.kappa() / p.sigma() - 0.5 * q * mu * mu + 0.5 * q * q * mu * mu * rho * rho;
  const double factor = std::exp(q * mu * c * (p.v0() + p.kappa() * p.theta() * p.horizon()) / p.sigma());
  return factor * affine_exponential_moment(p, query, opts);
}

}  // namespace ustab
