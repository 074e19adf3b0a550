#include "ustab/bundle_io.hpp"
#include "ustab/errors.hpp"
#include "ustab/general_market.hpp"
#include "ustab/market.hpp"
#include "ustab/parallel.hpp"

#include <doctest.h>

#include <cmath>
#include <cstdlib>
#include <sstream>

using namespace ustab;

namespace {

HestonParams base_params(double rho = 0.0) { return HestonParams(0.5, 2.0, 1.0, 0.5, 1.0, rho, 1.0); }

bool within(const Estimate& e, double reference, double sigmas = 3.0) {
  return std::abs(e.mean - reference) <= sigmas * e.se();
}

// Discrete-grid mean of full-truncation Euler when V never reaches 0:
// E[V_{k+1}] = E[V_k] + kappa (theta - E[V_k]) dt.
double euler_cir_mean(const HestonParams& p, int steps) {
  const double dt = p.horizon() / steps;
  return p.theta() + (p.v0() - p.theta()) * std::pow(1.0 - p.kappa() * dt, steps);
}

}  // namespace

TEST_CASE("Philox4x32-10 known-answer vectors") {
  using A4 = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A4{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A4{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A4{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("random stream cells are deterministic, distinct and in the open unit interval") {
  const RandomStream s(42);
  const auto a = s.uniform_pair(StreamTag::kHestonDrivers, 5, 7);
  CHECK(a == s.uniform_pair(StreamTag::kHestonDrivers, 5, 7));
  CHECK(a != s.uniform_pair(StreamTag::kHestonDrivers, 5, 8));
  CHECK(a != s.uniform_pair(StreamTag::kDualBridge, 5, 7));
  CHECK(a != RandomStream(43).uniform_pair(StreamTag::kHestonDrivers, 5, 7));
  double sum = 0.0, sq = 0.0;
  const int n = 20000;
  for (int i = 0; i < n; ++i) {
    const auto [u, v] = s.uniform_pair(StreamTag::kGeneralDrivers, static_cast<std::uint64_t>(i), 0);
    CHECK((u > 0.0 && u < 1.0 && v > 0.0 && v < 1.0));
    const auto [z1, z2] = s.normal_pair(StreamTag::kGeneralDrivers, static_cast<std::uint64_t>(i), 1);
    sum += z1 + z2;
    sq += z1 * z1 + z2 * z2;
  }
  CHECK(std::abs(sum / (2 * n)) < 3.0 / std::sqrt(2.0 * n));
  CHECK(std::abs(sq / (2 * n) - 1.0) < 3.0 * std::sqrt(2.0 / (2 * n)));
}

TEST_CASE("estimate arithmetic") {
  const std::vector<double> constant(1000, 0.1);
  const Estimate c = make_estimate(constant);
  CHECK(c.mean == 0.1);
  CHECK(c.se() == 0.0);
  const std::vector<double> with_inf = {1.0, -kInf, 2.0};
  const Estimate e = make_estimate(with_inf);
  CHECK(e.mean == -kInf);
  CHECK(e.nonfinite == 1);
  const std::vector<double> with_nan = {1.0, kNaN};
  CHECK_THROWS_AS(make_estimate(with_nan), std::domain_error);
  CHECK(normal_quantile_two_sided(0.95) == doctest::Approx(1.959963984540054).epsilon(1e-12));
  const std::vector<double> two = {1.0, 3.0};
  const Estimate t = make_estimate(two);
  CHECK(t.mean == 2.0);
  CHECK(t.se() == doctest::Approx(1.0));
}

TEST_CASE("Heston parameter validation") {
  CHECK_THROWS_AS(HestonParams(0.5, 1.0, 0.1, 1.0, 1.0, 0.0, 1.0), FellerViolation);
  try {
    HestonParams(0.5, 1.0, 0.1, 1.0, 1.0, 0.0, 1.0);
  } catch (const FellerViolation& e) {
    CHECK(std::string(e.what()).find("Feller") != std::string::npos);
  }
  CHECK_THROWS_AS(HestonParams(0.5, 2.0, 1.0, 0.5, 1.0, 1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(HestonParams(0.5, 2.0, 1.0, 0.5, 1.0, -1.0, 1.0), ConfigError);
  CHECK_THROWS_AS(HestonParams(0.5, 2.0, 1.0, 0.5, -1.0, 0.0, 1.0), ConfigError);
}

TEST_CASE("CIR terminal mean") {
  const TimeGrid grid(256, 1.0);
  const RandomStream stream(1);
  {
    const HestonParams p(0.0, 2.0, 1.0, 1.0, 1.0, 0.0, 1.0);
    const PathMatrix V = simulate_cir(p, grid, stream, 20000);
    CHECK(within(make_estimate(VectorXd(V.col(256))), 1.0));
  }
  {
    const HestonParams p(0.0, 2.0, 1.0, 1.0, 2.0, 0.0, 1.0);
    const PathMatrix V = simulate_cir(p, grid, stream, 20000);
    CHECK(within(make_estimate(VectorXd(V.col(256))), 1.0 + std::exp(-2.0)));
    CHECK(V.minCoeff() >= 0.0);
  }
  {
    // Vanishing vol of vol: the Euler recursion is deterministic.
    const HestonParams p(0.0, 2.0, 1.0, 1e-8, 2.0, 0.0, 1.0);
    const PathMatrix V = simulate_cir(p, grid, stream, 2000);
    const Estimate e = make_estimate(VectorXd(V.col(256)));
    CHECK(e.mean == doctest::Approx(euler_cir_mean(p, 256)).epsilon(1e-9));
    CHECK(e.se() * e.se() * 2000 < 1e-10);
    CHECK(e.mean == doctest::Approx(1.0 + std::exp(-2.0)).epsilon(2e-3));
  }
}

TEST_CASE("Heston market paths") {
  const TimeGrid grid(128, 1.0);
  const RandomStream stream(5);
  const PathBundle b0 = simulate_heston_market(base_params(0.0), grid, stream, 8000);
  const PathBundle b5 = simulate_heston_market(base_params(0.5), grid, stream, 8000);
  CHECK(b0.V == b5.V);
  CHECK(b0.B == b5.B);
  CHECK(b0.S != b5.S);
  CHECK(b0.V.minCoeff() >= 0.0);
  CHECK(b0.Z.minCoeff() > 0.0);
  CHECK(b5.Z.minCoeff() > 0.0);

  // S is the running sum of the stored increments.
  for (Index r = 0; r < 20; ++r) {
    double s = 0.0;
    for (int k = 0; k < grid.steps(); ++k) {
      s += b5.dS(r, k);
      CHECK(b5.S(r, k + 1) == s);
    }
  }

  const double eiv = base_params().mean_integrated_variance(1.0);
  CHECK(within(make_estimate(VectorXd(b5.S.col(128))), 0.5 * eiv));
  CHECK(within(make_estimate(VectorXd(b0.Z.col(128))), 1.0));

  const PathBundle flat = simulate_heston_market(base_params(0.3).with_mu(0.0), grid, stream, 8000);
  CHECK(within(make_estimate(VectorXd(flat.S.col(128))), 0.0));
  CHECK((flat.Z.array() == 1.0).all());
}

TEST_CASE("terminal simulator agrees with the bundle and the price quadratic variation") {
  const TimeGrid grid(64, 1.0);
  const RandomStream stream(9);
  const HestonParams p = base_params(0.4);
  const PathBundle b = simulate_heston_market(p, grid, stream, 4000);
  const HestonTerminals t = simulate_heston_terminals(p, grid, stream, 4000);
  CHECK(t.B == VectorXd(b.B.col(64)));
  CHECK(t.S == VectorXd(b.S.col(64)));
  CHECK(t.Z == VectorXd(b.Z.col(64)));
  CHECK(t.V == VectorXd(b.V.col(64)));
  const HestonTerminals big = simulate_heston_terminals(p, TimeGrid(256, 1.0), stream, 20000);
  CHECK(within(make_estimate(big.price_qv), p.mean_integrated_variance(1.0)));
}

TEST_CASE("density is a function of the rho-mixed driver") {
  const TimeGrid grid(64, 1.0);
  const PathBundle b = simulate_heston_market(base_params(0.5), grid, RandomStream(3), 20000);
  CHECK(within(make_estimate(VectorXd(b.Z.col(64))), 1.0));
  // Z S is a martingale under the density: E[Z_T S_T] = 0.
  const VectorXd zs = b.Z.col(64).cwiseProduct(b.S.col(64));
  CHECK(within(make_estimate(zs), 0.0));
  const VectorXd z0 = minimal_martingale_density(b, base_params(0.0));
  const VectorXd z5 = minimal_martingale_density(b, base_params(0.5));
  CHECK(z5 == VectorXd(b.Z.col(64)));
  CHECK(z0 != z5);
}

TEST_CASE("stochastic exponential") {
  const int paths = 20000, steps = 50;
  const double dt = 1.0 / steps;
  const RandomStream stream(4);
  PathMatrix dW(paths, steps);
  for (Index r = 0; r < paths; ++r) {
    for (int k = 0; k < steps; ++k) {
      dW(r, k) = std::sqrt(dt) * stream.normal_pair(StreamTag::kGeneralDrivers, static_cast<std::uint64_t>(r),
                                                     static_cast<std::uint32_t>(k)).first;
    }
  }
  const PathMatrix zero = PathMatrix::Zero(paths, steps);
  CHECK((stochastic_exponential<double>(zero, dW, dt).array() == 1.0).all());

  const double theta = 0.8;
  const PathMatrix th = PathMatrix::Constant(paths, steps, theta);
  const PathMatrix E = stochastic_exponential<double>(th, dW, dt);
  const VectorXd log_terminal = E.col(steps).array().log();
  CHECK(within(make_estimate(log_terminal), -0.5 * theta * theta));
  CHECK(within(make_estimate(VectorXd(E.col(steps))), 1.0));

  // Product rule for orthogonal drivers: here the second driver is an
  // independent copy, so E(a.M) E(b.N) = E(a.M + b.N) node by node in logs.
  PathMatrix dN(paths, steps);
  for (Index r = 0; r < paths; ++r) {
    for (int k = 0; k < steps; ++k) {
      dN(r, k) = std::sqrt(dt) * stream.normal_pair(StreamTag::kGeneralDrivers, static_cast<std::uint64_t>(r),
                                                     static_cast<std::uint32_t>(k)).second;
    }
  }
  const PathMatrix F = stochastic_exponential<double>(PathMatrix::Constant(paths, steps, -0.3), dN, dt);
  // Joint exponential of the 2-d driver with the summed log increments.
  PathMatrix joint_log = PathMatrix::Zero(paths, steps + 1);
  for (Index r = 0; r < paths; ++r) {
    double acc = 0.0;
    for (int k = 0; k < steps; ++k) {
      acc += theta * dW(r, k) - 0.3 * dN(r, k) - 0.5 * (theta * theta + 0.09) * dt;
      joint_log(r, k + 1) = acc;
    }
  }
  const PathMatrix lhs = (E.array().log() + F.array().log()).matrix();
  CHECK((lhs - joint_log).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("general markets") {
  const TimeGrid grid(64, 1.0);
  const RandomStream stream(6);
  const GeneralMarketCoeffs fam = scaled_brownian_family();
  const GeneralMarketPaths m8 = simulate_general_market(fam, 8.0, grid, stream, 500);
  CHECK(m8.S == (m8.B[0] / 8.0).eval());
  const GeneralMarketPaths m3 = simulate_general_market(fam, 3.0, grid, stream, 500);
  CHECK(((m3.S - m3.B[0] / 3.0).cwiseAbs().maxCoeff()) < 1e-14);
  const GeneralMarketPaths inf = simulate_general_market(fam, kInf, grid, stream, 500);
  CHECK((inf.S.array() == 0.0).all());
  CHECK(inf.B[0] == m8.B[0]);

  GeneralMarketCoeffs abm;
  abm.dimension = 1;
  abm.sigma = [](double, double, std::span<const double>, std::span<double> out) { out[0] = 0.7; };
  abm.lambda = [](double, double, std::span<const double>) { return 1.5; };
  const GeneralMarketPaths a = simulate_general_market(abm, 1.0, grid, stream, 20000);
  CHECK(within(make_estimate(VectorXd(a.S.col(64))), 1.5 * 0.49));

  const PathBundle pb = to_path_bundle(a, 6);
  CHECK(!pb.params.has_value());
  CHECK(pb.S == a.S);
  CHECK(within(make_estimate(VectorXd(pb.Z.col(64))), 1.0));
}

TEST_CASE("semimartingale distance") {
  const TimeGrid grid(64, 1.0);
  const RandomStream stream(8);
  const PathBundle b0 = simulate_heston_market(base_params(0.0), grid, stream, 4000);
  const auto rules = default_adversaries();
  CHECK(semimartingale_distance(b0.S, b0.S, rules).best.mean == 0.0);
  double prev = kInf;
  for (double rho : {0.4, 0.2, 0.1, 0.05}) {
    const PathBundle b = simulate_heston_market(base_params(rho), grid, stream, 4000);
    const DistanceEstimate d = semimartingale_distance(b.S, b0.S, rules);
    const DistanceEstimate e = semimartingale_distance(b0.S, b.S, rules);
    CHECK(d.best.mean == e.best.mean);
    CHECK(d.best.mean <= 1.0);
    CHECK(d.best.mean < prev + 3.0 * d.best.se());
    prev = d.best.mean;
  }
}

TEST_CASE("results do not depend on the worker count") {
  const TimeGrid grid(32, 1.0);
  ::setenv("USTAB_WORKERS", "1", 1);
  const PathBundle a = simulate_heston_market(base_params(0.3), grid, RandomStream(2), 3001);
  ::setenv("USTAB_WORKERS", "5", 1);
  CHECK(worker_count() == 5);
  const PathBundle b = simulate_heston_market(base_params(0.3), grid, RandomStream(2), 3001);
  ::unsetenv("USTAB_WORKERS");
  CHECK(a.S == b.S);
  CHECK(a.Z == b.Z);
  CHECK(a.V == b.V);
}

TEST_CASE("bundle cache round trip") {
  const PathBundle a = simulate_heston_market(base_params(0.2), TimeGrid(16, 1.0), RandomStream(12), 50);
  std::stringstream ss;
  write_bundle(ss, a);
  const PathBundle b = read_bundle(ss);
  CHECK(b.B == a.B);
  CHECK(b.W == a.W);
  CHECK(b.V == a.V);
  CHECK(b.S == a.S);
  CHECK(b.Z == a.Z);
  CHECK(b.dS == a.dS);
  CHECK(b.seed == a.seed);
  CHECK(b.rho == a.rho);
  REQUIRE(b.params.has_value());
  CHECK(b.params->kappa() == a.params->kappa());
  std::stringstream junk("not a bundle");
  CHECK_THROWS(read_bundle(junk));
}
