#include "ustab/affine.hpp"
#include "ustab/indifference.hpp"
#include "ustab/kw.hpp"
#include "ustab/oracles.hpp"
#include "ustab/report.hpp"

#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <random>
#include <sstream>
#include <string>
#include <vector>

using namespace ustab;
namespace fs = std::filesystem;

namespace {

struct Verdict {
  bool pass = true;
  std::string detail;
};

// Accumulates named checks; the first failure is kept in the detail.
class Ledger {
 public:
  void check(bool ok, const std::string& what) {
    ++count_;
    if (!ok && pass_) first_failure_ = what;
    pass_ = pass_ && ok;
  }
  Verdict verdict(const std::string& summary) const {
    return {pass_, pass_ ? summary : "first failure: " + first_failure_ + " (" + summary + ")"};
  }
  int count() const { return count_; }

 private:
  bool pass_ = true;
  int count_ = 0;
  std::string first_failure_;
};

std::string fmt(const char* pattern, double a, double b = 0.0, double c = 0.0) {
  char buf[256];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

HestonParams base_market(double rho = 0.0) { return HestonParams(0.5, 2.0, 1.0, 0.5, 1.0, rho, 1.0); }

// Ternary search for the maximum of a concave function on [lo, hi].
double concave_max(const std::function<double(double)>& f, double lo, double hi) {
  for (int i = 0; i < 300; ++i) {
    const double a = lo + (hi - lo) / 3.0, b = hi - (hi - lo) / 3.0;
    if (f(a) < f(b)) {
      lo = a;
    } else {
      hi = b;
    }
  }
  return f(0.5 * (lo + hi));
}

Verdict conjugate_algebra() {
  Ledger l;
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  const std::vector<UtilitySpec> specs = {UtilitySpec::power(0.5), UtilitySpec::power(-2.0), UtilitySpec::log(),
                                          UtilitySpec::exponential(1.0), UtilitySpec::exponential(3.0)};
  for (int draw = 0; draw < 1000; ++draw) {
    const UtilitySpec& u = specs[static_cast<std::size_t>(draw) % specs.size()];
    const ConjugatePair pair(u);
    const double y = std::exp(4.0 * unit(gen) - 2.0);
    const double x = u.halfline() ? std::exp(6.0 * unit(gen) - 3.0) : 10.0 * unit(gen) - 5.0;
    const double v = pair.value(y);
    l.check(utility_eval(u, x) - x * y <= v + 1e-8, "Fenchel inequality");
    const double xi = inverse_marginal(u, y);
    l.check(std::abs(utility_eval(u, xi) - xi * y - v) <= 1e-8 * std::max(1.0, std::abs(v)), "Fenchel equality");
  }
  for (int draw = 0; draw < 1000; ++draw) {
    const double alpha = 0.2 + 3.0 * unit(gen);
    const double y = std::exp(2.0 * unit(gen) - 1.0);
    const double c = 0.1 + 3.0 * unit(gen);
    const auto [a, b] = exp_identity_check(alpha, y, c);
    l.check(std::abs(a) < 1e-12 && std::abs(b) < 1e-12, "exponential identities");
  }
  for (const UtilitySpec& u : {UtilitySpec::power(0.5), UtilitySpec::log(), UtilitySpec::power(-1.0)}) {
    const ConjugatePair pair(u);
    for (int draw = 0; draw < 100; ++draw) {
      const double y = std::exp(3.0 * unit(gen) - 1.5);
      const double phi_min = unit(gen) - 0.5;
      const double z = phi_min + 2.0 * unit(gen);
      const double grid = concave_max([&](double x) { return utility_eval(u, x + z) - x * y; }, -phi_min, 1e4);
      const double boundary = utility_eval(u, z - phi_min) + phi_min * y;
      const double reference = std::max(grid, std::isfinite(boundary) ? boundary : -kInf);
      const double vc = constrained_conjugate(pair, y, z, phi_min);
      l.check(std::abs(vc - reference) <= 1e-6 * std::max(1.0, std::abs(reference)), "constrained conjugate");
    }
  }
  return l.verdict(std::to_string(l.count()) + " checks");
}

Verdict market_oracles() {
  Ledger l;
  const HestonParams p = base_market();
  const TimeGrid grid(512, p.horizon());
  const HestonTerminals t = simulate_heston_terminals(p, grid, RandomStream(101), 100000);
  const Estimate v = make_estimate(t.V), z = make_estimate(t.Z);
  const double v_ref = p.theta() + (p.v0() - p.theta()) * std::exp(-p.kappa() * p.horizon());
  l.check(std::abs(v.mean - v_ref) <= 3.0 * v.se(), "E[V_T]");
  l.check(std::abs(z.mean - 1.0) <= 3.0 * z.se(), "E[Z_T]");
  double bond_err = 0.0;
  for (double u : {0.5, 1.0, 2.0}) {
    bond_err = std::max(bond_err, std::abs(affine_exponential_moment(p, {0.0, -u}) - cir_bond_price(p, u)));
  }
  l.check(bond_err <= 1e-8, "Riccati vs bond");
  double worst = 0.0;
  for (double a : {-1.0, -0.5, 0.0}) {
    for (double b : {-1.0, -0.5, 0.25}) {
      const VectorXd s = (a * t.V + b * t.integrated_variance).array().exp().matrix();
      const Estimate e = make_estimate(s);
      const double ref = affine_exponential_moment(p, {a, b});
      worst = std::max(worst, std::abs(e.mean - ref) / e.se());
      l.check(std::abs(e.mean - ref) <= 3.0 * e.se(), "Riccati vs MC");
    }
  }
  return l.verdict(fmt("E[V_T] %.5f vs %.5f, E[Z_T] %.5f", v.mean, v_ref, z.mean) +
                   fmt(", bond error %.1e, worst MC z-score %.2f", bond_err, worst));
}

Verdict dual_anchor() {
  Ledger l;
  const HestonParams p = base_market();
  const HestonTerminals t = simulate_heston_terminals(p, TimeGrid(512, p.horizon()), RandomStream(102), 100000);
  const ConjugatePair pair(UtilitySpec::power(0.5));
  // V(y) = 1/y for p = 1/2, so E[V(yZ)] = E[Z^-1] / y.
  const double moment = mmm_density_moment(p, -1.0);
  double worst = 0.0;
  for (double y : {0.5, 1.0, 2.0}) {
    VectorXd s(t.Z.size());
    for (Index i = 0; i < s.size(); ++i) s(i) = conjugate_eval(pair, y * t.Z(i));
    const double ref = moment / y;
    const double rel = std::abs(make_estimate(s).mean - ref) / ref;
    worst = std::max(worst, rel);
    l.check(rel <= 0.01, "relative error at y");
  }
  return l.verdict(fmt("worst relative error %.4f", worst));
}

Verdict weak_duality() {
  Ledger l;
  const ConjugatePair pair(UtilitySpec::power(0.5));
  const ClaimSpec claim = ClaimSpec::put_spread(-1.0, 1.0);
  const TimeGrid grid(64, 1.0);
  const double g = 0.5 / (1.0 - 0.5);
  StrategyFamily family{StrategySpec::proportional(0.0, 0.0, 0.0), (VectorXd(3) << -0.5, -2.0, -2.0).finished(),
                        (VectorXd(3) << 0.5, 2.0, 2.0).finished()};
  const PrimalSettings settings{family, 20, true, (VectorXd(3) << 0.0, g, 0.0).finished()};
  DualFamily dual;
  dual.lo = Eigen::MatrixXd::Constant(1, 3, -1.0);
  dual.hi = Eigen::MatrixXd::Constant(1, 3, 1.0);
  int violations = 0;
  double worst = -kInf;
  for (double rho : {0.0, 0.2, 0.4}) {
    const PathBundle b = simulate_heston_market(base_market(rho), grid, RandomStream(103), 4000);
    std::vector<Estimate> duals;
    for (double y : {0.5, 1.0, 2.0}) duals.push_back(minimize_dual(y, pair, &claim, b, dual, 20).estimate);
    for (double x : {0.25, 0.5, 1.0}) {
      const Estimate u = best_primal(x, pair, &claim, b, settings).result.estimate;
      std::size_t j = 0;
      for (double y : {0.5, 1.0, 2.0}) {
        const Estimate& d = duals[j++];
        const double slack = u.mean - d.mean - x * y;
        const double se = combined_se(u, d);
        worst = std::max(worst, slack / std::max(se, 1e-300));
        const bool ok = slack <= 3.0 * se;
        violations += !ok;
        l.check(ok, fmt("x=%g y=%g rho=%g", x, y, rho));
      }
    }
  }
  return l.verdict(fmt("27 cells, %g violations, max (primal - dual - xy) / SE = %.2f", violations, worst));
}

Verdict degenerate_gap() {
  Ledger l;
  DegenerateSettings s;
  s.steps = 256;
  s.paths = 20000;
  s.seed = 104;
  const DegenerateRow r = degenerate_example({8.0}, 1.0, 0.0, s).front();
  l.check(std::abs(r.analytic_un + std::exp(-0.5)) < 1e-12, "analytic u_n");
  l.check(std::abs(r.analytic_uinf + (1.0 + std::exp(-1.0)) / 2.0) < 1e-12, "analytic u_inf");
  l.check(std::abs(r.analytic_gap - 0.0774) < 5e-4, "analytic gap to 3 dp");
  l.check(r.hedged.mean > -0.62, "hedged bound in the n = 8 market");
  const double mc_gap = r.hedged.mean - r.mc_uinf.mean;
  const double se = combined_se(r.hedged, r.mc_uinf);
  l.check(std::abs(mc_gap - r.analytic_gap) <= 3.0 * se, "MC gap");
  return l.verdict(fmt("hedged %.5f, analytic gap %.5f, MC gap %.5f", r.hedged.mean, r.analytic_gap, mc_gap) +
                   fmt(" +- %.5f", se));
}

Verdict subreplication() {
  Ledger l;
  const HestonParams p = base_market(0.5);
  const ClaimSpec claim = ClaimSpec::logistic();
  const PathBundle b = simulate_heston_market(p, TimeGrid(256, p.horizon()), RandomStream(105), 20000);
  const double gap = 0.01;
  double best = kInf, best_x = 0.0;
  for (double x : {-8.0, -6.0, -4.0, -3.0, -2.0, -1.0, 0.0, 1.0, 2.0}) {
    const Estimate e = subreplication_estimate(p, claim, x, p.horizon() - gap, b);
    const double q = gaussian_expectation([&](double z) { return claim(z); }, x, std::sqrt(gap));
    l.check(std::abs(e.mean - q) <= 3.0 * e.se() + 1e-12, fmt("quadrature at x=%g", x));
    if (e.mean < best) {
      best = e.mean;
      best_x = x;
    }
  }
  l.check(best - claim.phi_min() <= 0.02, "minimum near phi_min");
  return l.verdict(fmt("minimum %.5f at x = %g, phi_min %g", best, best_x, claim.phi_min()));
}

SweepConfig sweep_config(const ClaimSpec& claim, std::vector<double> rhos) {
  return SweepConfig{base_market(),
                     std::move(rhos),
                     {0.25},
                     {0.5, 1.0, 1.5, 2.0, 2.5, 3.0, 4.0},
                     claim,
                     UtilitySpec::power(0.5),
                     64,
                     4000,
                     106,
                     30,
                     10,
                     1,
                     1.0,
                     10.0,
                     2.0,
                     RegressionBasis{},
                     BisectionSettings{},
                     Admissibility{}};
}

Verdict instability() {
  Ledger l;
  const SweepTable t = rho_sweep(sweep_config(ClaimSpec::put_spread(-1.0, 1.0), {0.4, 0.2, 0.1, 0.05}));
  const SummaryRow& base = t.summary.front();
  l.check(base.rho == 0.0, "rho = 0 row first");
  l.check(base.excess > 3.0 * base.excess_se, "u(x, 0) exceeds the cap");
  double min_gap_z = kInf;
  for (const SummaryRow& s : t.summary) {
    if (s.rho == 0.0) continue;
    l.check(s.excess <= 3.0 * s.excess_se, fmt("cap bounds u at rho=%g", s.rho));
    l.check(s.price_gap > 3.0 * s.price_gap_se, fmt("price gap at rho=%g", s.rho));
    min_gap_z = std::min(min_gap_z, s.price_gap / s.price_gap_se);
  }
  const SweepTable z = rho_sweep(sweep_config(ClaimSpec::constant(0.0), {0.05}));
  const Estimate& u0 = z.summary[0].u_hat;
  const Estimate& u1 = z.summary[1].u_hat;
  l.check(std::abs(u1.mean - u0.mean) <= 3.0 * combined_se(u0, u1), "zero-claim stability at rho = 0.05");
  return l.verdict(fmt("excess at rho = 0: %.4f (%.1f SE), min price-gap z-score %.1f", base.excess,
                       base.excess / base.excess_se, min_gap_z));
}

Verdict kw_diagnostics() {
  Ledger l;
  const TimeGrid grid(128, 1.0);
  const KwFamily fam = kw_family("nondegenerate");
  for (double n : {1.0, 10.0, 100.0}) {
    const GeneralMarketPaths m = simulate_general_market(fam.coeffs, n, grid, RandomStream(107), 1000);
    const std::vector<PathMatrix> nu = evaluate_integrand(fam.nu, m);
    const ProjectionResult p = kw_decompose(nu, m.sigma, m.dB, grid.dt());
    double orth = 0.0, pyth = 0.0;
    for (Index r = 0; r < m.paths(); ++r) {
      double total = 0.0;
      for (int k = 0; k < grid.steps(); ++k) {
        double dot = 0.0;
        for (std::size_t j = 0; j < nu.size(); ++j) {
          dot += (nu[j](r, k) - p.H(r, k) * m.sigma[j](r, k)) * m.sigma[j](r, k);
          total += nu[j](r, k) * nu[j](r, k) * grid.dt();
        }
        orth = std::max(orth, std::abs(dot));
      }
      pyth = std::max(pyth, std::abs(total - p.projected_qv(r) - p.residual_qv(r)));
    }
    l.check(orth < 1e-10, "orthogonality");
    l.check(pyth < 1e-10, "Pythagoras");
  }
  const auto decay = kw_convergence_diag(fam.coeffs, fam.nu, grid, RandomStream(108), 4000, {1.0, 10.0, 100.0});
  const double ratio = decay.front().energy.mean / decay.back().energy.mean;
  l.check(ratio >= 4.0, "decay over two decades");
  const KwFamily deg = kw_family("degenerate");
  const auto flat = kw_convergence_diag(deg.coeffs, deg.nu, grid, RandomStream(109), 4000, {1.0, 10.0, 100.0});
  for (const EnergyPoint& e : flat) {
    l.check(std::abs(e.energy.mean - grid.horizon()) <= 3.0 * e.energy.se() + 1e-12, "degenerate energy = T");
  }
  return l.verdict(fmt("decay ratio %.3g, degenerate energies %.12f", ratio, flat.back().energy.mean));
}

std::map<std::string, std::string> csv_files(const fs::path& dir) {
  std::map<std::string, std::string> out;
  for (const auto& e : fs::directory_iterator(dir)) {
    if (e.path().extension() != ".csv") continue;
    std::ifstream in(e.path(), std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    out[e.path().filename().string()] = ss.str();
  }
  return out;
}

Verdict determinism() {
  Ledger l;
  const std::vector<std::string> configs = {
      R"({"experiment": "degenerate", "seed": 9, "paths": 2000, "steps": 64, "degenerate": {"n": [8, "inf"]}})",
      R"({"experiment": "sweep", "seed": 9, "paths": 1000, "steps": 32,
          "claim": {"type": "put_spread", "lo": -1, "hi": 1},
          "sweep": {"rho": [0.2, 0.05], "x": [0.25], "y": [1, 2], "primal_budget": 10, "dual_budget": 5}})",
      R"({"experiment": "kw", "seed": 9, "paths": 2000, "steps": 64, "kw": {"n": [1, 10, 100]}})",
      R"({"experiment": "subreplication", "seed": 9, "paths": 2000, "steps": 64})",
      R"({"experiment": "oracle-check", "seed": 9, "paths": 2000, "steps": 64})"};
  const fs::path root = fs::temp_directory_path() / "ustab_acceptance";
  int files = 0;
  for (const std::string& text : configs) {
    std::map<std::string, std::string> first;
    for (const char* workers : {"1", "4", "1", "3"}) {
      setenv("USTAB_WORKERS", workers, 1);
      fs::remove_all(root);
      run_experiment(text, ".", {}, root.string());
      const auto out = csv_files(root);
      if (first.empty()) {
        first = out;
        files += static_cast<int>(out.size());
        l.check(!out.empty(), "outputs written");
      } else {
        l.check(out == first, "identical CSVs");
      }
    }
  }
  unsetenv("USTAB_WORKERS");
  fs::remove_all(root);
  return l.verdict(std::to_string(files) + " CSVs identical over 4 runs each (workers 1, 4, 1, 3)");
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Verdict()>>> criteria = {
      {"conjugate algebra", conjugate_algebra},
      {"market oracles", market_oracles},
      {"dual anchor", dual_anchor},
      {"weak duality", weak_duality},
      {"degenerate example gap", degenerate_gap},
      {"subreplication", subreplication},
      {"instability exhibit", instability},
      {"projection diagnostics", kw_diagnostics},
      {"determinism", determinism}};
  bool all = true;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Verdict v;
    try {
      v = run();
    } catch (const std::exception& e) {
      v = {false, std::string("exception: ") + e.what()};
    }
    all = all && v.pass;
    std::printf("criterion %d %s: %s  %s\n", index, name, v.pass ? "PASS" : "FAIL", v.detail.c_str());
    std::fflush(stdout);
  }
  return all ? 0 : 1;
}
