#include "ustab/primal.hpp"

#include "ustab/nelder_mead.hpp"
#include "ustab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

namespace ustab {

void RegressionBasis::validate(const TimeGrid& grid) const {
  if (degree_b < 0 || degree_v < 0) throw std::invalid_argument("basis degrees must be nonnegative");
  if (buckets < 1 || buckets > grid.steps()) {
    throw std::invalid_argument("basis buckets must lie in [1, steps]");
  }
  if (!(z_clip > 0.0)) throw std::invalid_argument("basis clip must be positive");
}

int bucket_of_step(int k, int steps, int buckets) {
  return static_cast<int>(static_cast<long long>(k) * buckets / steps);
}

void regression_features(const RegressionBasis& basis, const TimeGrid& grid, int k, double b,
                         double v, std::span<double> out) {
  const double tau = grid.horizon() - grid.time(k) + grid.dt();
  const double root_tau = std::sqrt(tau);
  if (!(v > 0.0)) {
    std::fill(out.begin(), out.end(), 0.0);
    return;
  }
  const double z = std::clamp(b / root_tau, -basis.z_clip, basis.z_clip);
  const double lead = 1.0 / (root_tau * std::sqrt(v));
  // Normalized Hermite: h_{a+1} = (z h_a - sqrt(a) h_{a-1}) / sqrt(a + 1).
  double h_prev = 0.0, h = 1.0;
  for (int a = 0; a <= basis.degree_b; ++a) {
    double vp = lead * h;
    for (int e = 0; e <= basis.degree_v; ++e) {
      out[static_cast<std::size_t>(a * (basis.degree_v + 1) + e)] = vp;
      vp *= v;
    }
    const double h_next = (z * h - std::sqrt(static_cast<double>(a)) * h_prev) / std::sqrt(a + 1.0);
    h_prev = h;
    h = h_next;
  }
}

StrategySpec StrategySpec::constant(double c) {
  StrategySpec s;
  s.kind = StrategyKind::kConstant;
  s.coeffs = VectorXd::Constant(1, c);
  return s;
}

StrategySpec StrategySpec::state_linear(double c0, double c1, double c2) {
  StrategySpec s;
  s.kind = StrategyKind::kStateLinear;
  s.coeffs = (VectorXd(3) << c0, c1, c2).finished();
  return s;
}

StrategySpec StrategySpec::proportional(double a, double g0, double g1) {
  StrategySpec s;
  s.kind = StrategyKind::kProportional;
  s.coeffs = (VectorXd(3) << a, g0, g1).finished();
  return s;
}

std::string StrategySpec::id() const {
  std::ostringstream os;
  os.precision(6);
  switch (kind) {
    case StrategyKind::kConstant: os << "const(" << coeffs(0) << ")"; break;
    case StrategyKind::kStateLinear:
      os << "linear(" << coeffs(0) << ' ' << coeffs(1) << ' ' << coeffs(2) << ")";
      break;
    case StrategyKind::kProportional:
      os << "proportional(" << coeffs(0) << ' ' << coeffs(1) << ' ' << coeffs(2) << ")";
      break;
    case StrategyKind::kRegression:
      os << "regression(deg " << basis.degree_b << '/' << basis.degree_v << ", " << basis.buckets
         << " buckets)";
      break;
  }
  if (overlay) os << "+" << overlay_scale << "*" << overlay->id();
  return os.str();
}

int coefficient_count(StrategyKind kind, const RegressionBasis& basis) {
  switch (kind) {
    case StrategyKind::kConstant: return 1;
    case StrategyKind::kStateLinear: return 3;
    case StrategyKind::kProportional: return 3;
    case StrategyKind::kRegression: return basis.buckets * basis.size();
  }
  return 0;
}

void holdings_row(const StrategySpec& spec, const PathBundle& bundle, Index path,
                  std::span<double> out, double capital) {
  const int n = bundle.steps();
  if (spec.coeffs.size() != coefficient_count(spec.kind, spec.basis)) {
    throw std::invalid_argument("strategy coefficient count does not match its kind");
  }
  switch (spec.kind) {
    case StrategyKind::kConstant:
      std::fill(out.begin(), out.begin() + n, spec.coeffs(0));
      break;
    case StrategyKind::kStateLinear:
      for (int k = 0; k < n; ++k) {
        out[static_cast<std::size_t>(k)] = spec.coeffs(0) + spec.coeffs(1) * bundle.V(path, k) +
                                           spec.coeffs(2) * bundle.B(path, k);
      }
      break;
    case StrategyKind::kProportional: {
      const double start = capital + spec.coeffs(0);
      double growth = 1.0;
      for (int k = 0; k < n; ++k) {
        const double g = spec.coeffs(1) + spec.coeffs(2) * bundle.grid.time(k);
        out[static_cast<std::size_t>(k)] = start * g * growth;
        growth *= 1.0 + g * bundle.dS(path, k);
      }
      break;
    }
    case StrategyKind::kRegression: {
      spec.basis.validate(bundle.grid);
      const int m = spec.basis.size();
      std::vector<double> phi(static_cast<std::size_t>(m));
      for (int k = 0; k < n; ++k) {
        regression_features(spec.basis, bundle.grid, k, bundle.B(path, k), bundle.V(path, k), phi);
        const Index base = static_cast<Index>(bucket_of_step(k, n, spec.basis.buckets)) * m;
        double h = 0.0;
        for (int j = 0; j < m; ++j) h += spec.coeffs(base + j) * phi[static_cast<std::size_t>(j)];
        out[static_cast<std::size_t>(k)] = h;
      }
      break;
    }
  }
  if (spec.overlay) {
    std::vector<double> extra(static_cast<std::size_t>(n));
    holdings_row(*spec.overlay, bundle, path, extra, capital);
    for (int k = 0; k < n; ++k) {
      out[static_cast<std::size_t>(k)] += spec.overlay_scale * extra[static_cast<std::size_t>(k)];
    }
  }
}

PathMatrix strategy_holdings(const StrategySpec& spec, const PathBundle& bundle, double capital) {
  PathMatrix H(bundle.paths(), bundle.steps());
  parallel_for(static_cast<std::size_t>(bundle.paths()), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      holdings_row(spec, bundle, r, std::span<double>(H.row(r).data(), static_cast<std::size_t>(H.cols())),
                   capital);
    }
  });
  return H;
}

PathMatrix wealth_process(const StrategySpec& spec, const PathBundle& bundle) {
  return wealth_process<double>(strategy_holdings(spec, bundle), bundle.dS);
}

namespace {

struct StopOutcome {
  double terminal;
  int stop_step;
};

// Truncated, floor-stopped wealth along one path.  h holds raw holdings and
// is overwritten with the effective ones; x_out (if given) receives wealth.
StopOutcome stopped_row(const PathBundle& bundle, Index r, double holding_bound, double level,
                        std::span<double> h, double* x_out) {
  const RandomStream stream(bundle.seed);
  const double dt = bundle.grid.dt();
  double x = 0.0;
  int stop = -1;
  if (x_out) x_out[0] = 0.0;
  for (int k = 0; k < bundle.steps(); ++k) {
    double& hk = h[static_cast<std::size_t>(k)];
    if (stop >= 0 || std::abs(hk) > holding_bound) hk = 0.0;
    if (stop < 0 && hk != 0.0) {
      const double next = x + hk * bundle.dS(r, k);
      bool hit = next <= level;
      if (!hit) {
        const double var = hk * hk * bundle.V(r, k) * dt;
        if (var > 0.0) {
          const double exponent = -2.0 * (x - level) * (next - level) / var;
          if (exponent > -745.0) {
            const double u = stream.uniform(StreamTag::kPrimalBridge, static_cast<std::uint64_t>(r),
                                            static_cast<std::uint32_t>(k));
            hit = u < std::exp(exponent);
          }
        }
      }
      if (hit) {
        x = level;
        stop = k;
      } else {
        x = next;
      }
    }
    if (x_out) x_out[k + 1] = x;
  }
  return {x, stop};
}

void check_admissibility(const Admissibility& a) {
  if (!(a.floor > 0.0) || !(a.slack > 0.0)) throw std::invalid_argument("floor K and slack must be positive");
  if (!(a.holding_bound > 0.0)) throw std::invalid_argument("holding bound must be positive");
}

}  // namespace

AdmissibleWealth enforce_admissibility(const StrategySpec& spec, const PathBundle& bundle,
                                       double floor, double slack) {
  Admissibility adm = spec.admissibility;
  adm.floor = floor;
  adm.slack = slack;
  check_admissibility(adm);
  AdmissibleWealth out;
  out.H = strategy_holdings(spec, bundle);
  out.X.resize(bundle.paths(), bundle.steps() + 1);
  out.stop_step.resize(bundle.paths());
  const double level = -floor - slack;
  parallel_for(static_cast<std::size_t>(bundle.paths()), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      std::span<double> h(out.H.row(r).data(), static_cast<std::size_t>(out.H.cols()));
      out.stop_step(r) = stopped_row(bundle, r, adm.holding_bound, level, h, out.X.row(r).data()).stop_step;
    }
  });
  out.stopped_fraction =
      static_cast<double>((out.stop_step.array() >= 0).count()) / static_cast<double>(bundle.paths());
  return out;
}

PrimalResult primal_bound(double x, const StrategySpec& strategy, const ConjugatePair& pair,
                          const ClaimSpec* claim, const PathBundle& bundle, bool constrained) {
  check_admissibility(strategy.admissibility);
  const double phi_min = claim ? claim->phi_min() : 0.0;
  const double phi_max = claim ? claim->phi_max() : 0.0;
  const bool halfline = pair.utility().halfline();
  if (halfline && !(x + phi_min > 0.0)) {
    throw std::invalid_argument("halfline primal bound needs x > -phi_min");
  }
  double level = -strategy.admissibility.floor - strategy.admissibility.slack;
  if (constrained) {
    level = std::max(level, -x - phi_min);
  } else if (halfline) {
    level = std::max(level, -x - phi_max);
  }
  const VectorXd f = claim ? claim_payoffs(*claim, bundle) : VectorXd::Zero(bundle.paths());
  VectorXd sample(bundle.paths());
  std::vector<unsigned char> stopped(static_cast<std::size_t>(bundle.paths()), 0);
  std::vector<unsigned char> violated(static_cast<std::size_t>(bundle.paths()), 0);
  parallel_for(static_cast<std::size_t>(bundle.paths()), [&](std::size_t begin, std::size_t end) {
    std::vector<double> h(static_cast<std::size_t>(bundle.steps()));
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      holdings_row(strategy, bundle, r, h, x);
      const StopOutcome o = stopped_row(bundle, r, strategy.admissibility.holding_bound, level, h, nullptr);
      const double terminal = (x + f(r)) + o.terminal;
      stopped[i] = o.stop_step >= 0;
      violated[i] = halfline && terminal < 0.0;
      sample(r) = utility_eval(pair.utility(), terminal);
    }
  });
  PrimalResult res;
  res.estimate = make_estimate(sample);
  for (std::size_t i = 0; i < stopped.size(); ++i) {
    res.violations += violated[i];
    res.stopped_fraction += stopped[i];
  }
  res.stopped_fraction /= static_cast<double>(bundle.paths());
  res.strategy_id = strategy.id();
  return res;
}

Index StrategyFamily::dimension() const {
  return coefficient_count(prototype.kind, prototype.basis) + (prototype.overlay ? 1 : 0);
}

StrategySpec StrategyFamily::at(const VectorXd& v) const {
  const Index own = coefficient_count(prototype.kind, prototype.basis);
  if (v.size() != dimension()) throw std::invalid_argument("strategy family dimension mismatch");
  StrategySpec s = prototype;
  s.coeffs = v.head(own);
  if (prototype.overlay) s.overlay_scale = v(own);
  return s;
}

PrimalOptimum optimize_primal(double x, const ConjugatePair& pair, const ClaimSpec* claim,
                              const PathBundle& bundle, const StrategyFamily& family, int budget,
                              bool constrained, const VectorXd* start) {
  if (budget <= 0) throw std::invalid_argument("primal optimizer budget must be positive");
  const Index dim = family.dimension();
  if (family.lo.size() != dim || family.hi.size() != dim) {
    throw std::invalid_argument("strategy family box dimension mismatch");
  }
  const auto objective = [&](const VectorXd& v) {
    const double m = primal_bound(x, family.at(v), pair, claim, bundle, constrained).estimate.mean;
    return m == -kInf ? kInf : -m;
  };
  const VectorXd origin = start ? *start : VectorXd::Zero(dim);
  const BoxMinimum m = minimize_in_box(objective, family.lo, family.hi, origin, budget);
  PrimalOptimum out;
  out.coefficients = m.argmin;
  out.strategy = family.at(m.argmin);
  out.result = primal_bound(x, out.strategy, pair, claim, bundle, constrained);
  out.evaluations = m.evaluations;
  return out;
}

}  // namespace ustab
