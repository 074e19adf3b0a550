#include "ustab/affine.hpp"
#include "ustab/dual.hpp"
#include "ustab/errors.hpp"

#include <doctest.h>

#include <cmath>

using namespace ustab;

namespace {

HestonParams base_params(double rho = 0.0) { return HestonParams(0.5, 2.0, 1.0, 0.5, 1.0, rho, 1.0); }

bool within(const Estimate& e, double reference, double sigmas = 3.0) {
  return std::abs(e.mean - reference) <= sigmas * e.se();
}

// E[exp(-u int V)] for CIR in the hyperbolic form.
double bond_reference(const HestonParams& p, double u) {
  const double k = p.kappa(), s2 = p.sigma() * p.sigma(), T = p.horizon();
  const double g = std::sqrt(k * k + 2.0 * s2 * u);
  const double sh = std::sinh(0.5 * g * T), ch = std::cosh(0.5 * g * T);
  const double den = g * ch + k * sh;
  const double b = 2.0 * u * sh / den;
  const double a = std::pow(g * std::exp(0.5 * k * T) / den, 2.0 * k * p.theta() / s2);
  return a * std::exp(-b * p.v0());
}

// E[phi(x + sd N)] by composite Simpson on [-10, 10].
double gaussian_simpson(const ClaimSpec& phi, double x, double sd) {
  const int n = 4000;
  const double h = 20.0 / n;
  double acc = 0.0;
  for (int i = 0; i <= n; ++i) {
    const double z = -10.0 + h * i;
    const double w = (i == 0 || i == n) ? 1.0 : (i % 2 ? 4.0 : 2.0);
    acc += w * phi(x + sd * z) * std::exp(-0.5 * z * z);
  }
  return acc * h / 3.0 / std::sqrt(2.0 * M_PI);
}

}  // namespace

TEST_CASE("affine moment: trivial query and CIR bond closed form") {
  const HestonParams p = base_params();
  CHECK(affine_exponential_moment(p, {0.0, 0.0}) == 1.0);
  for (double u : {0.1, 0.5, 1.0, 3.0}) {
    CHECK(std::abs(affine_exponential_moment(p, {0.0, -u}) - bond_reference(p, u)) < 1e-8);
  }
  const HestonParams q(0.0, 1.5, 0.4, 0.9, 0.2, 0.0, 2.0);
  CHECK(std::abs(affine_exponential_moment(q, {0.0, -0.7}) - bond_reference(q, 0.7)) < 1e-8);
}

TEST_CASE("affine moment matches Monte Carlo on a 3x3 grid") {
  const HestonParams p = base_params();
  const HestonTerminals t = simulate_heston_terminals(p, TimeGrid(256, 1.0), RandomStream(21), 20000);
  for (double a : {-1.0, -0.5, 0.2}) {
    for (double b : {-1.0, -0.3, 0.3}) {
      const VectorXd s = (a * t.V + b * t.integrated_variance).array().exp().matrix();
      CHECK(within(make_estimate(s), affine_exponential_moment(p, {a, b})));
    }
  }
}

TEST_CASE("affine moment explosion is reported") {
  CHECK_THROWS_AS(affine_exponential_moment(base_params(), {20.0, 0.0}), MomentExplosion);
}

TEST_CASE("density moments match the affine reduction") {
  for (double rho : {0.0, 0.5}) {
    const HestonParams p = base_params(rho);
    const HestonTerminals t = simulate_heston_terminals(p, TimeGrid(256, 1.0), RandomStream(22), 20000);
    // q = p / (p - 1) for p in {1/2, 1/3, -1}.
    for (double q : {-1.0, -0.5, 0.5}) {
      const VectorXd s = t.Z.array().pow(q).matrix();
      const double ref = mmm_density_moment(p, q);
      CHECK(std::abs(make_estimate(s).mean / ref - 1.0) < 0.01);
    }
    CHECK(mmm_density_moment(p, 1.0) == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(mmm_density_moment(p, 0.0) == 1.0);
  }
}

TEST_CASE("dual bound with the minimal density") {
  const ConjugatePair half(UtilitySpec::power(0.5));
  const TimeGrid grid(128, 1.0);
  {
    const PathBundle flat = simulate_heston_market(base_params().with_mu(0.0), grid, RandomStream(1), 1000);
    const Estimate e = dual_bound_mmm(2.0, half, nullptr, flat);
    CHECK(e.mean == 0.5);
    CHECK(e.se() == 0.0);
  }
  const HestonParams p = base_params();
  const PathBundle b = simulate_heston_market(p, grid, RandomStream(2), 20000);
  for (double y : {0.5, 1.0, 2.0}) {
    // (1 - p) / p y^q E[Z^q] with q = p / (p - 1) = -1.
    CHECK(within(dual_bound_mmm(y, half, nullptr, b), mmm_density_moment(p, -1.0) / y));
  }
  // Constant claim under a whole-line utility adds y c E[Z] exactly.
  const ConjugatePair expo(UtilitySpec::exponential(1.0));
  const ClaimSpec c = ClaimSpec::constant(0.3);
  const double y = 1.3;
  const Estimate with = dual_bound_mmm(y, expo, &c, b);
  const Estimate without = dual_bound_mmm(y, expo, nullptr, b);
  const double z_mean = make_estimate(VectorXd(b.Z.col(128))).mean;
  CHECK(std::abs(with.mean - (without.mean + y * 0.3 * z_mean)) < 1e-12);
}

TEST_CASE("the rho = 0 density can be rebuilt bit-identically from any bundle") {
  const TimeGrid grid(64, 1.0);
  const PathBundle a = simulate_heston_market(base_params(0.0), grid, RandomStream(3), 2000);
  const PathBundle b = simulate_heston_market(base_params(0.4), grid, RandomStream(3), 2000);
  CHECK(minimal_martingale_density(b, base_params(0.0)) == VectorXd(a.Z.col(64)));
  const ConjugatePair half(UtilitySpec::power(0.5));
  const ClaimSpec f = ClaimSpec::call_spread(-1.0, 1.0);
  CHECK(dual_bound_density(1.0, half, &f, claim_payoffs(f, b), minimal_martingale_density(b, base_params(0.0)))
            .mean == dual_bound_mmm(1.0, half, &f, a).mean);
}

TEST_CASE("perturbed densities") {
  const TimeGrid grid(64, 1.0);
  const ConjugatePair half(UtilitySpec::power(0.5));
  const ClaimSpec f = ClaimSpec::call_spread(-1.0, 1.0);
  const PathBundle b = simulate_heston_market(base_params(0.5), grid, RandomStream(4), 6000);

  const DualCandidate zero = DualCandidate::zero(2, 5.0);
  const Estimate m = dual_bound_mmm(1.0, half, &f, b);
  const Estimate z = dual_bound_perturbed(1.0, half, &f, b, zero);
  CHECK(z.mean == m.mean);
  CHECK(z.se() == m.se());

  DualCandidate c = DualCandidate::zero(2, 3.0);
  c.coeffs << 1.5, -0.5, 0.8, -2.0, 0.4, -1.0;
  const PathMatrix D = candidate_density_paths(b, c);
  CHECK(D.minCoeff() > 0.0);
  CHECK(D.maxCoeff() <= 3.0);
  CHECK(within(make_estimate(VectorXd(D.col(64))), 1.0));
  CHECK_THROWS(candidate_density(b, DualCandidate{1, Eigen::MatrixXd::Zero(1, 3), 1.0}));
}

TEST_CASE("Jensen: no perturbation beats the minimal density for a replicable claim") {
  const TimeGrid grid(64, 1.0);
  const ConjugatePair half(UtilitySpec::power(0.5));
  const ClaimSpec f = ClaimSpec::call_spread(-1.0, 1.0);
  const PathBundle b = simulate_heston_market(base_params(0.0), grid, RandomStream(5), 6000);
  const Estimate m = dual_bound_mmm(1.0, half, &f, b);
  for (double s : {-1.0, -0.3, 0.3, 1.0}) {
    DualCandidate c = DualCandidate::zero(1, 5.0);
    c.coeffs << s, 0.0, 0.5 * s;
    const Estimate e = dual_bound_perturbed(1.0, half, &f, b, c);
    CHECK(e.mean >= m.mean - 3.0 * combined_se(e, m));
  }
}

TEST_CASE("dual minimization") {
  const TimeGrid grid(64, 1.0);
  const ConjugatePair half(UtilitySpec::power(0.5));
  const ClaimSpec f = ClaimSpec::put_spread(-1.0, 1.0);
  const PathBundle b = simulate_heston_market(base_params(0.5), grid, RandomStream(6), 4000);

  DualFamily singleton{1, Eigen::MatrixXd::Zero(1, 3), Eigen::MatrixXd::Zero(1, 3), 5.0};
  const DualOptimum s = minimize_dual(1.0, half, &f, b, singleton, 5);
  CHECK(s.estimate.mean == dual_bound_mmm(1.0, half, &f, b).mean);

  DualFamily fam{1, Eigen::MatrixXd::Constant(1, 3, -1.0), Eigen::MatrixXd::Constant(1, 3, 1.0), 5.0};
  const DualOptimum a = minimize_dual(1.0, half, &f, b, fam, 20);
  const DualOptimum again = minimize_dual(1.0, half, &f, b, fam, 20);
  CHECK(a.candidate.coeffs == again.candidate.coeffs);
  CHECK(a.estimate.mean == again.estimate.mean);
  const Estimate m = dual_bound_mmm(1.0, half, &f, b);
  CHECK(a.estimate.mean <= m.mean + 3.0 * m.se());
  CHECK(a.estimate.mean < m.mean);

  // Midpoint convexity of the bound in y.
  const double y1 = 0.6, y2 = 1.8;
  const Estimate v1 = minimize_dual(y1, half, &f, b, fam, 15).estimate;
  const Estimate v2 = minimize_dual(y2, half, &f, b, fam, 15).estimate;
  const Estimate vm = minimize_dual(0.5 * (y1 + y2), half, &f, b, fam, 15).estimate;
  CHECK(vm.mean <= 0.5 * (v1.mean + v2.mean) + 3.0 * std::hypot(vm.se(), 0.5 * combined_se(v1, v2)));
}

TEST_CASE("subreplication after handoff") {
  const HestonParams p = base_params(0.5);
  const TimeGrid grid(100, 1.0);
  const PathBundle b = simulate_heston_market(p, grid, RandomStream(7), 20000);
  const Estimate c = subreplication_estimate(p, ClaimSpec::constant(0.4), 1.0, 0.99, b);
  CHECK(c.mean == 0.4);
  CHECK(c.se() == 0.0);

  const ClaimSpec logistic = ClaimSpec::logistic();
  const Estimate e = subreplication_estimate(p, logistic, -5.0, 0.99, b);
  CHECK(within(e, gaussian_simpson(logistic, -5.0, 0.1)));
  CHECK(e.mean == doctest::Approx(0.0067).epsilon(0.02));
  // Off-grid handoff times are bridged.
  const Estimate off = subreplication_estimate(p, logistic, -5.0, 0.995, b);
  CHECK(within(off, gaussian_simpson(logistic, -5.0, std::sqrt(0.005))));

  double prev = kInf;
  for (double x : {0.0, -2.0, -4.0, -6.0, -8.0}) {
    const Estimate s = subreplication_estimate(p, logistic, x, 0.99, b);
    CHECK(s.mean < prev);
    prev = s.mean;
  }
  CHECK(prev < 0.02);
  CHECK_THROWS(subreplication_estimate(p.with_rho(0.0), logistic, 0.0, 0.99, b));
  CHECK_THROWS(subreplication_estimate(p, logistic, 0.0, 1.0, b));
}
