#include "ustab/kw.hpp"

#include <doctest.h>

#include <cmath>

using namespace ustab;

namespace {

const TimeGrid kGrid(64, 1.0);

GeneralMarketPaths drivers(const GeneralMarketCoeffs& coeffs, double n, Index paths, std::uint64_t seed) {
  return simulate_general_market(coeffs, n, kGrid, RandomStream(seed), paths);
}

void check_identities(const std::vector<PathMatrix>& nu, const GeneralMarketPaths& m) {
  const ProjectionResult p = kw_decompose(nu, m.sigma, m.dB, kGrid.dt());
  const std::size_t d = nu.size();
  for (Index r = 0; r < m.paths(); ++r) {
    double total = 0.0;
    for (int k = 0; k < kGrid.steps(); ++k) {
      double orth = 0.0, dl = 0.0;
      for (std::size_t j = 0; j < d; ++j) {
        const double e = nu[j](r, k) - p.H(r, k) * m.sigma[j](r, k);
        orth += e * m.sigma[j](r, k);
        dl += e * m.dB[j](r, k);
        total += nu[j](r, k) * nu[j](r, k) * kGrid.dt();
      }
      CHECK(std::abs(orth) < 1e-10);
      CHECK(std::abs(dl - p.residual(r, k)) < 1e-12);
    }
    CHECK(std::abs(total - p.projected_qv(r) - p.residual_qv(r)) < 1e-10);
  }
}

}  // namespace

TEST_CASE("projection formula on a two-driver market") {
  GeneralMarketCoeffs c;
  c.dimension = 2;
  c.lambda = [](double, double, std::span<const double>) { return 0.0; };
  c.sigma = [](double n, double, std::span<const double>, std::span<double> out) {
    out[0] = 1.0;
    out[1] = 1.0 / n;
  };
  const KwFamily fam = kw_family("nondegenerate");
  for (double n : {1.0, 3.0, 10.0}) {
    const GeneralMarketPaths m = drivers(c, n, 50, 1);
    const std::vector<PathMatrix> nu = evaluate_integrand(fam.nu, m);
    const ProjectionResult p = kw_decompose(nu, m.sigma, m.dB, kGrid.dt());
    CHECK((p.H.array() == (1.0 / n) / (1.0 + 1.0 / (n * n))).all());
    check_identities(nu, m);
  }
}

TEST_CASE("integrands parallel to sigma are fully projected") {
  const KwFamily fam = kw_family("nondegenerate");
  const GeneralMarketPaths m = drivers(fam.coeffs, 4.0, 200, 2);
  std::vector<PathMatrix> nu;
  for (const auto& s : m.sigma) nu.push_back(2.5 * s);
  const ProjectionResult p = kw_decompose(nu, m.sigma, m.dB, kGrid.dt());
  CHECK((p.residual.array().abs() < 1e-14).all());
  CHECK((p.H.array() - 2.5).abs().maxCoeff() < 1e-14);
  check_identities(nu, m);
}

TEST_CASE("identities on the nondegenerate family") {
  const KwFamily fam = kw_family("nondegenerate");
  for (double n : {1.0, 7.0, 100.0}) {
    const GeneralMarketPaths m = drivers(fam.coeffs, n, 300, 3);
    check_identities(evaluate_integrand(fam.nu, m), m);
  }
}

TEST_CASE("zero and scaled integrands") {
  const KwFamily fam = kw_family("nondegenerate");
  const GeneralMarketPaths m = drivers(fam.coeffs, 5.0, 500, 4);
  std::vector<PathMatrix> nu = evaluate_integrand(fam.nu, m);
  std::vector<PathMatrix> zero, scaled;
  for (const auto& v : nu) {
    zero.push_back(PathMatrix::Zero(v.rows(), v.cols()));
    scaled.push_back(3.0 * v);
  }
  const ProjectionResult z = kw_decompose(zero, m.sigma, m.dB, kGrid.dt());
  CHECK(z.energy.mean == 0.0);
  CHECK((z.H.array() == 0.0).all());
  const ProjectionResult a = kw_decompose(nu, m.sigma, m.dB, kGrid.dt());
  const ProjectionResult b = kw_decompose(scaled, m.sigma, m.dB, kGrid.dt());
  CHECK(b.energy.mean == doctest::Approx(9.0 * a.energy.mean).epsilon(1e-12));
}

TEST_CASE("dimension mismatches are rejected") {
  const std::vector<PathMatrix> one{PathMatrix::Zero(3, 4)};
  const std::vector<PathMatrix> two{PathMatrix::Zero(3, 4), PathMatrix::Zero(3, 4)};
  CHECK_THROWS(kw_decompose(one, two, two, 0.1));
  CHECK_THROWS(kw_decompose(two, two, {PathMatrix::Zero(3, 4), PathMatrix::Zero(3, 5)}, 0.1));
}

TEST_CASE("degenerate family keeps energy T") {
  const KwFamily fam = kw_family("degenerate");
  const std::vector<double> ns{1.0, 2.0, 10.0, 100.0};
  const auto points = kw_convergence_diag(fam.coeffs, fam.nu, kGrid, RandomStream(5), 500, ns);
  REQUIRE(points.size() == ns.size());
  for (const EnergyPoint& e : points) {
    // H = n on every cell, so the energy is exactly T up to rounding.
    CHECK(e.energy.mean == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(e.zero_cell_fraction == 0.0);
  }
  const GeneralMarketPaths lim = drivers(fam.coeffs, kInf, 10, 5);
  CHECK(nondegeneracy_check(lim.sigma) == 1.0);
}

TEST_CASE("nondegenerate family energies decay") {
  const KwFamily fam = kw_family("nondegenerate");
  const std::vector<double> ns{1.0, 3.0, 10.0, 30.0, 100.0};
  const auto points = kw_convergence_diag(fam.coeffs, fam.nu, kGrid, RandomStream(6), 2000, ns);
  for (std::size_t i = 1; i < points.size(); ++i) {
    CHECK(points[i].energy.mean <= points[i - 1].energy.mean + 3.0 * combined_se(points[i].energy, points[i - 1].energy));
    CHECK(points[i].zero_cell_fraction == 0.0);
  }
  CHECK(points.back().energy.mean < points.front().energy.mean / 4.0);
  const auto zero = [](double, std::span<const double>, std::span<double> out) { out[0] = out[1] = 0.0; };
  for (const EnergyPoint& e : kw_convergence_diag(fam.coeffs, zero, kGrid, RandomStream(6), 200, ns)) {
    CHECK(e.energy.mean == 0.0);
  }
}

TEST_CASE("integrands not orthogonal to the limit are rejected") {
  const KwFamily fam = kw_family("nondegenerate");
  const auto bad = [](double, std::span<const double>, std::span<double> out) { out[0] = out[1] = 1.0; };
  CHECK_THROWS(kw_convergence_diag(fam.coeffs, bad, kGrid, RandomStream(7), 10, {1.0}));
  CHECK_THROWS(kw_family("unknown"));
}

TEST_CASE("zero-cell fraction") {
  GeneralMarketCoeffs half;
  half.dimension = 1;
  half.lambda = [](double, double, std::span<const double>) { return 0.0; };
  half.sigma = [](double, double t, std::span<const double>, std::span<double> out) { out[0] = t < 0.5 ? 1.0 : 0.0; };
  CHECK(nondegeneracy_check(drivers(half, 1.0, 20, 8).sigma) == 0.5);
  CHECK(nondegeneracy_check(drivers(scaled_brownian_family(), 2.0, 20, 8).sigma) == 0.0);
  CHECK(nondegeneracy_check(drivers(scaled_brownian_family(), kInf, 20, 8).sigma) == 1.0);
  CHECK_THROWS(nondegeneracy_check({}));
}
