#include "ustab/indifference.hpp"

#include "ustab/errors.hpp"
#include "ustab/general_market.hpp"

#include <algorithm>
#include <cmath>
#include <memory>
#include <sstream>

namespace ustab {

PrimalOptimum best_primal(double x, const ConjugatePair& pair, const ClaimSpec* claim,
                          const PathBundle& bundle, const PrimalSettings& settings) {
  const Index dim = settings.family.dimension();
  const VectorXd start = settings.start.size() == dim ? settings.start : VectorXd::Zero(dim);
  if (settings.budget > 0) {
    return optimize_primal(x, pair, claim, bundle, settings.family, settings.budget,
                           settings.constrained, &start);
  }
  PrimalOptimum out;
  out.coefficients = start.cwiseMax(settings.family.lo).cwiseMin(settings.family.hi);
  out.strategy = settings.family.at(out.coefficients);
  out.result = primal_bound(x, out.strategy, pair, claim, bundle, settings.constrained);
  out.evaluations = 1;
  return out;
}

PriceResult indifference_price(double x, const PrimalSettings& u_settings,
                               const PrimalSettings& w_settings, const ClaimSpec& claim,
                               const ConjugatePair& pair, const BisectionSettings& solver,
                               const PathBundle& bundle, const PrimalOptimum* u_known) {
  if (!(solver.tolerance > 0.0) || solver.max_iterations <= 0 || !(solver.noise_sigmas >= 0.0)) {
    throw std::invalid_argument("bisection settings must be positive");
  }
  PriceResult res;
  res.u = u_known ? u_known->result.estimate
                  : best_primal(x, pair, &claim, bundle, u_settings).result.estimate;
  const auto w_at = [&](double p) {
    return best_primal(x + p, pair, nullptr, bundle, w_settings).result.estimate;
  };
  const auto gap = [&](const Estimate& w) { return w.mean - res.u.mean; };
  const auto noise = [&](const Estimate& w) { return solver.noise_sigmas * combined_se(w, res.u); };
  const auto finish = [&](double p, const Estimate& w, double width) {
    res.p = p;
    res.w = w;
    res.bracket_width = width;
    res.within_noise = std::abs(gap(w)) <= noise(w);
    return res;
  };

  double lo = claim.phi_min(), hi = claim.phi_max();
  const Estimate w_lo = w_at(lo);
  if (hi == lo) return finish(lo, w_lo, 0.0);
  if (gap(w_lo) >= -noise(w_lo)) {
    res.noise_floor = gap(w_lo) <= noise(w_lo);
    if (!res.noise_floor) res.diagnosis = "no sign change: w(x + phi_min) exceeds u(x)";
    return finish(lo, w_lo, hi - lo);
  }
  const Estimate w_hi = w_at(hi);
  if (gap(w_hi) <= noise(w_hi)) {
    res.noise_floor = gap(w_hi) >= -noise(w_hi);
    if (!res.noise_floor) res.diagnosis = "no sign change: w(x + phi_max) is below u(x)";
    return finish(hi, w_hi, hi - lo);
  }
  Estimate w_mid = w_lo;
  double mid = lo;
  for (res.iterations = 0; res.iterations < solver.max_iterations; ++res.iterations) {
    mid = 0.5 * (lo + hi);
    w_mid = w_at(mid);
    const double g = gap(w_mid);
    if (std::abs(g) <= noise(w_mid)) {
      res.noise_floor = true;
      ++res.iterations;
      return finish(mid, w_mid, hi - lo);
    }
    if (g < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
    if (hi - lo <= solver.tolerance) {
      ++res.iterations;
      break;
    }
  }
  return finish(mid, w_mid, hi - lo);
}

void SweepConfig::validate() const {
  for (double r : rhos) {
    if (!(r > -1.0 && r < 1.0)) throw ConfigError("rho", "rho must lie in (-1, 1)");
  }
  if (xs.empty()) throw ConfigError("x", "at least one x value required");
  if (ys.empty()) throw ConfigError("y", "at least one y value required");
  for (double y : ys) {
    if (!(y > 0.0)) throw ConfigError("y", "y values must be positive");
  }
  if (steps <= 0) throw ConfigError("steps", "must be positive");
  if (paths <= 0) throw ConfigError("paths", "must be positive");
  if (primal_budget <= 0) throw ConfigError("primal_budget", "must be positive");
  if (dual_budget <= 0) throw ConfigError("dual_budget", "must be positive");
  if (dual_buckets <= 0) throw ConfigError("dual_buckets", "must be positive");
  if (!(dual_cap > 1.0)) throw ConfigError("dual_cap", "must exceed 1");
  if (!(bisection.tolerance > 0.0)) throw ConfigError("bisection_tolerance", "must be positive");
  if (utility.halfline()) {
    for (double x : xs) {
      if (!(x + claim.phi_min() > 0.0)) throw ConfigError("x", "halfline utilities need x > -phi_min");
    }
  }
}

namespace {

// Merton fraction of wealth held in S when dS = mu V dt + sqrt(V) dB.
double myopic_fraction(const UtilitySpec& u, double mu) {
  if (const auto* power = std::get_if<PowerKind>(&u.kind())) return mu / (1.0 - power->p);
  return mu;
}

// Delta-method standard error of an indifference price: the u-side and
// w-side noise divided by the slope of w at x + p.
double price_se(double x, const PriceResult& price, const ConjugatePair& pair,
                const PathBundle& bundle, const PrimalSettings& w_settings) {
  const double h = 0.01;
  const double a = x + price.p - h, b = x + price.p + h;
  if (pair.utility().halfline() && !(a > 0.0)) return kInf;
  const double wa = best_primal(a, pair, nullptr, bundle, w_settings).result.estimate.mean;
  const double wb = best_primal(b, pair, nullptr, bundle, w_settings).result.estimate.mean;
  const double slope = (wb - wa) / (2.0 * h);
  if (!(slope > 0.0)) return kInf;
  return combined_se(price.u, price.w) / slope;
}

}  // namespace

SweepTable rho_sweep(const SweepConfig& cfg) {
  cfg.validate();
  SweepTable table;
  const ConjugatePair pair(cfg.utility);
  const TimeGrid grid(cfg.steps, cfg.market.horizon());
  const RandomStream stream(cfg.seed);
  const ClaimSpec* claim = &cfg.claim;

  const PathBundle base = simulate_heston_market(cfg.market.with_rho(0.0), grid, stream, cfg.paths);
  std::shared_ptr<const StrategySpec> hedge;
  double fit_price = 0.0;
  if (!cfg.claim.is_constant()) {
    const LsmcHedge fit = lsmc_hedge(cfg.claim, base, cfg.hedge_basis);
    for (const auto& w : fit.report.warnings) table.warnings.push_back(w);
    hedge = std::make_shared<const StrategySpec>(fit.strategy);
    fit_price = fit.report.price;
  }

  // Wealth-proportional sub-account (plus the claim hedge overlay on the u
  // side), searched from the myopic fraction with the hedge fully on when
  // unconstrained and off when constrained.
  const double hedge_price = hedge ? fit_price : 0.0;
  const double g_start = myopic_fraction(cfg.utility, cfg.market.mu());
  const double box = cfg.strategy_box;
  StrategySpec w_proto = StrategySpec::proportional(0.0, 0.0, 0.0);
  w_proto.admissibility = cfg.admissibility;
  StrategySpec u_proto = w_proto;
  u_proto.overlay = hedge;
  const StrategyFamily w_family{w_proto, (VectorXd(3) << -0.5, -box, -box).finished(),
                                (VectorXd(3) << 0.5, box, box).finished()};
  const PrimalSettings w_settings{w_family, cfg.primal_budget, false,
                                  (VectorXd(3) << 0.0, g_start, 0.0).finished()};
  StrategyFamily u_family{u_proto,
                          (VectorXd(3) << cfg.claim.phi_min() - 1.0, -box, -box).finished(),
                          (VectorXd(3) << cfg.claim.phi_max() + 1.0, box, box).finished()};
  VectorXd u_start[2] = {(VectorXd(3) << hedge_price, g_start, 0.0).finished(),
                         (VectorXd(3) << cfg.claim.phi_min(), g_start, 0.0).finished()};
  if (hedge) {
    u_family.lo.conservativeResize(4);
    u_family.hi.conservativeResize(4);
    u_family.lo(3) = -1.5;
    u_family.hi(3) = 0.5;
    for (int m = 0; m < 2; ++m) {
      u_start[m].conservativeResize(4);
      u_start[m](3) = m == 0 ? -1.0 : 0.0;
    }
  }

  // Shared cap from the rho = 0 density; B and V are common to every rho.
  const VectorXd z0 = base.Z.col(base.steps());
  const VectorXd payoff = claim_payoffs(cfg.claim, base);
  std::vector<Estimate> cap_by_y;
  for (double y : cfg.ys) cap_by_y.push_back(dual_bound_density(y, pair, claim, payoff, z0));

  DualFamily dual_family;
  dual_family.buckets = cfg.dual_buckets;
  dual_family.lo = Eigen::MatrixXd::Constant(cfg.dual_buckets, 3, -cfg.dual_box);
  dual_family.hi = Eigen::MatrixXd::Constant(cfg.dual_buckets, 3, cfg.dual_box);
  dual_family.cap = cfg.dual_cap;

  std::vector<double> rhos = cfg.rhos;
  if (std::find(rhos.begin(), rhos.end(), 0.0) == rhos.end()) rhos.insert(rhos.begin(), 0.0);
  std::stable_partition(rhos.begin(), rhos.end(), [](double r) { return r == 0.0; });

  std::vector<PriceRow> base_prices;
  std::vector<Estimate> base_constrained;
  for (double rho : rhos) {
    const PathBundle bundle =
        rho == 0.0 ? base : simulate_heston_market(cfg.market.with_rho(rho), grid, stream, cfg.paths);
    for (std::size_t j = 0; j < cfg.ys.size(); ++j) {
      const double y = cfg.ys[j];
      const Estimate mmm = dual_bound_mmm(y, pair, claim, bundle);
      table.dual.push_back({y, rho, "mmm", mmm});
      const DualOptimum best = minimize_dual(y, pair, claim, bundle, dual_family, cfg.dual_budget);
      table.dual.push_back({y, rho, best.candidate.id(), best.estimate});
      if (rho == 0.0) table.dual.push_back({y, rho, "cap_rho0", cap_by_y[j]});
    }
    for (std::size_t i = 0; i < cfg.xs.size(); ++i) {
      const double x = cfg.xs[i];
      PrimalOptimum by_mode[2];
      for (int constrained = 0; constrained < 2; ++constrained) {
        by_mode[constrained] =
            best_primal(x, pair, claim, bundle,
                        PrimalSettings{u_family, cfg.primal_budget, constrained == 1, u_start[constrained]});
        const PrimalResult& r = by_mode[constrained].result;
        table.primal.push_back(
            {x, rho, constrained == 1, r.strategy_id, r.estimate, r.violations, r.stopped_fraction});
      }
      const bool use_constrained = rho != 0.0;
      const PrimalOptimum& u = by_mode[use_constrained ? 1 : 0];
      const PrimalSettings u_settings{u_family, cfg.primal_budget, use_constrained,
                                      u_start[use_constrained ? 1 : 0]};
      PriceRow row{x, rho,
                   indifference_price(x, u_settings, w_settings, cfg.claim, pair, cfg.bisection,
                                      bundle, &u),
                   0.0};
      row.se = price_se(x, row.price, pair, bundle, w_settings);
      table.prices.push_back(row);
      if (rho == 0.0) {
        base_prices.push_back(row);
        base_constrained.push_back(by_mode[1].result.estimate);
      }

      SummaryRow s{};
      s.x = x;
      s.rho = rho;
      s.u_hat = u.result.estimate;
      s.u_c_hat = base_constrained[i];
      std::size_t arg = 0;
      double cap = kInf;
      for (std::size_t j = 0; j < cfg.ys.size(); ++j) {
        const double v = cap_by_y[j].mean + x * cfg.ys[j];
        if (v < cap) {
          cap = v;
          arg = j;
        }
      }
      s.cap = cap_by_y[arg];
      s.cap.mean = cap;
      s.cap_y = cfg.ys[arg];
      s.excess = s.u_hat.mean - cap;
      s.excess_se = combined_se(s.u_hat, s.cap);
      s.price_gap = base_prices[i].price.p - row.price.p;
      s.price_gap_se = std::hypot(base_prices[i].se, row.se);
      table.summary.push_back(s);
    }
  }
  return table;
}

std::vector<DegenerateRow> degenerate_example(const std::vector<double>& n_list, double alpha,
                                              double x, const DegenerateSettings& settings) {
  const ConjugatePair pair(UtilitySpec::exponential(alpha));
  const ClaimSpec claim = ClaimSpec::indicator_nonnegative();
  const TimeGrid grid(settings.steps, 1.0);
  const RandomStream stream(settings.seed);
  const GeneralMarketCoeffs family = scaled_brownian_family();
  const double u_n = utility_eval(pair.utility(), x + 0.5);
  const double u_inf =
      0.5 * (utility_eval(pair.utility(), x) + utility_eval(pair.utility(), x + 1.0));

  const PathBundle limit =
      to_path_bundle(simulate_general_market(family, kInf, grid, stream, settings.paths), settings.seed);
  const Estimate mc_inf =
      primal_bound(x, StrategySpec::constant(0.0), pair, &claim, limit, false).estimate;

  std::vector<DegenerateRow> rows;
  for (double n : n_list) {
    DegenerateRow row{n, mc_inf, u_n, u_inf, mc_inf, u_n - u_inf, 0.0};
    if (std::isfinite(n)) {
      const PathBundle bundle =
          to_path_bundle(simulate_general_market(family, n, grid, stream, settings.paths), settings.seed);
      const LsmcHedge fit = lsmc_hedge(claim, bundle, settings.basis);
      row.hedge_residual_sd = fit.report.sd;
      StrategySpec proto = StrategySpec::constant(0.0);
      proto.overlay = std::make_shared<const StrategySpec>(fit.strategy);
      const StrategyFamily fam{proto, (VectorXd(2) << -0.5 * n, -1.5).finished(),
                               (VectorXd(2) << 0.5 * n, 0.5).finished()};
      const VectorXd start = (VectorXd(2) << 0.0, -1.0).finished();
      row.hedged = optimize_primal(x, pair, &claim, bundle, fam, settings.budget, false, &start)
                       .result.estimate;
    }
    rows.push_back(row);
  }
  return rows;
}

}  // namespace ustab
