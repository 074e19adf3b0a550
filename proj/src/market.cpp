#include "ustab/market.hpp"

#include "ustab/errors.hpp"
#include "ustab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace ustab {

HestonParams::HestonParams(double mu, double kappa, double theta, double sigma, double v0,
                           double rho, double horizon)
    : mu_(mu), kappa_(kappa), theta_(theta), sigma_(sigma), v0_(v0), rho_(rho), horizon_(horizon) {
  if (!std::isfinite(mu)) throw ConfigError("mu", "must be finite");
  if (!(kappa > 0.0) || !std::isfinite(kappa)) throw ConfigError("kappa", "must be positive");
  if (!(theta > 0.0) || !std::isfinite(theta)) throw ConfigError("theta", "must be positive");
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw ConfigError("sigma", "must be positive");
  if (!(v0 > 0.0) || !std::isfinite(v0)) throw ConfigError("v0", "must be positive");
  if (!(rho > -1.0 && rho < 1.0)) throw ConfigError("rho", "rho must lie in (-1, 1)");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon", "must be positive");
  if (2.0 * kappa * theta < sigma * sigma) {
    std::ostringstream os;
    os.precision(17);
    os << "Feller condition 2*kappa*theta >= sigma^2 violated: 2*kappa*theta = "
       << 2.0 * kappa * theta << " < sigma^2 = " << sigma * sigma;
    throw FellerViolation(os.str());
  }
}

HestonParams HestonParams::with_rho(double rho) const {
  return HestonParams(mu_, kappa_, theta_, sigma_, v0_, rho, horizon_);
}

HestonParams HestonParams::with_mu(double mu) const {
  return HestonParams(mu, kappa_, theta_, sigma_, v0_, rho_, horizon_);
}

double HestonParams::mean_variance(double t) const {
  return theta_ + (v0_ - theta_) * std::exp(-kappa_ * t);
}

double HestonParams::mean_integrated_variance(double t) const {
  return theta_ * t + (v0_ - theta_) * (1.0 - std::exp(-kappa_ * t)) / kappa_;
}

TimeGrid::TimeGrid(int steps, double horizon) : steps_(steps), horizon_(horizon) {
  if (steps <= 0) throw ConfigError("steps", "must be positive");
  if (!(horizon > 0.0) || !std::isfinite(horizon)) throw ConfigError("horizon", "must be positive");
}

namespace {

struct RowOut {
  double* B = nullptr;
  double* W = nullptr;
  double* V = nullptr;
  double* S = nullptr;
  double* Z = nullptr;
  double* dS = nullptr;
};

struct PathTerminal {
  double B, W, V, S, Z, int_v, qv;
};

void check_paths(Index paths) {
  if (paths <= 0) throw ConfigError("paths", "must be positive");
}

// One path of the full-truncation Euler scheme.  Increments are re-derived
// from the stored node values so every later recomputation is bit-identical.
PathTerminal heston_path(const HestonParams& p, const TimeGrid& grid, const RandomStream& stream,
                         Index path, const RowOut& out) {
  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);
  const double c = std::sqrt(1.0 - p.rho() * p.rho());
  double b = 0.0, w = 0.0, aux = p.v0(), v = p.v0(), s = 0.0, log_z = 0.0, int_v = 0.0, qv = 0.0;
  if (out.B) out.B[0] = 0.0;
  if (out.W) out.W[0] = 0.0;
  if (out.V) out.V[0] = v;
  if (out.S) out.S[0] = 0.0;
  if (out.Z) out.Z[0] = 1.0;
  for (int k = 0; k < grid.steps(); ++k) {
    const auto [g1, g2] =
        stream.normal_pair(StreamTag::kHestonDrivers, static_cast<std::uint64_t>(path),
                           static_cast<std::uint32_t>(k));
    const double b_next = b + g1 * sqdt;
    const double w_next = w + g2 * sqdt;
    const double db = b_next - b;
    const double dw = w_next - w;
    const double sv = std::sqrt(v);
    const double db_rho = c * db + p.rho() * dw;
    const double ds = p.mu() * v * dt + sv * db_rho;
    s += ds;
    log_z += -p.mu() * sv * db_rho - 0.5 * p.mu() * p.mu() * v * dt;
    int_v += v * dt;
    qv += ds * ds;
    aux += p.kappa() * (p.theta() - v) * dt + p.sigma() * sv * db;
    v = std::max(aux, 0.0);
    b = b_next;
    w = w_next;
    if (out.B) out.B[k + 1] = b;
    if (out.W) out.W[k + 1] = w;
    if (out.V) out.V[k + 1] = v;
    if (out.S) out.S[k + 1] = s;
    if (out.Z) out.Z[k + 1] = std::exp(log_z);
    if (out.dS) out.dS[k] = ds;
  }
  return {b, w, v, s, std::exp(log_z), int_v, qv};
}

}  // namespace

VectorXd claim_payoffs(const ClaimSpec& claim, const PathBundle& bundle) {
  const PathMatrix& driver = claim.underlying() == Underlying::kB ? bundle.B : bundle.W;
  VectorXd f(bundle.paths());
  for (Index r = 0; r < bundle.paths(); ++r) f(r) = claim(driver(r, bundle.steps()));
  return f;
}

PathMatrix simulate_cir(const HestonParams& params, const TimeGrid& grid, const RandomStream& stream,
                        Index paths) {
  check_paths(paths);
  PathMatrix V(paths, grid.steps() + 1);
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      RowOut out;
      out.V = V.row(static_cast<Index>(i)).data();
      heston_path(params, grid, stream, static_cast<Index>(i), out);
    }
  });
  return V;
}

PathBundle simulate_heston_market(const HestonParams& params, const TimeGrid& grid,
                                  const RandomStream& stream, Index paths) {
  check_paths(paths);
  PathBundle bundle{grid, params, params.rho(), stream.seed(), {}, {}, {}, {}, {}, {}};
  const Index n = grid.steps() + 1;
  bundle.B.resize(paths, n);
  bundle.W.resize(paths, n);
  bundle.V.resize(paths, n);
  bundle.S.resize(paths, n);
  bundle.Z.resize(paths, n);
  bundle.dS.resize(paths, grid.steps());
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      RowOut out{bundle.B.row(r).data(), bundle.W.row(r).data(), bundle.V.row(r).data(),
                 bundle.S.row(r).data(), bundle.Z.row(r).data(), bundle.dS.row(r).data()};
      heston_path(params, grid, stream, r, out);
    }
  });
  return bundle;
}

HestonTerminals simulate_heston_terminals(const HestonParams& params, const TimeGrid& grid,
                                          const RandomStream& stream, Index paths) {
  check_paths(paths);
  HestonTerminals t;
  for (VectorXd* v : {&t.B, &t.W, &t.V, &t.S, &t.Z, &t.integrated_variance, &t.price_qv}) {
    v->resize(paths);
  }
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      const PathTerminal p = heston_path(params, grid, stream, r, RowOut{});
      t.B(r) = p.B;
      t.W(r) = p.W;
      t.V(r) = p.V;
      t.S(r) = p.S;
      t.Z(r) = p.Z;
      t.integrated_variance(r) = p.int_v;
      t.price_qv(r) = p.qv;
    }
  });
  return t;
}

PathMatrix minimal_martingale_density_paths(const PathBundle& bundle, const HestonParams& params) {
  const double dt = bundle.grid.dt();
  const double c = std::sqrt(1.0 - params.rho() * params.rho());
  PathMatrix Z(bundle.paths(), bundle.steps() + 1);
  parallel_for(static_cast<std::size_t>(bundle.paths()), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      double log_z = 0.0;
      Z(r, 0) = 1.0;
      for (int k = 0; k < bundle.steps(); ++k) {
        const double db = bundle.B(r, k + 1) - bundle.B(r, k);
        const double dw = bundle.W(r, k + 1) - bundle.W(r, k);
        const double v = bundle.V(r, k);
        const double sv = std::sqrt(v);
        const double db_rho = c * db + params.rho() * dw;
        log_z += -params.mu() * sv * db_rho - 0.5 * params.mu() * params.mu() * v * dt;
        Z(r, k + 1) = std::exp(log_z);
      }
    }
  });
  return Z;
}

VectorXd minimal_martingale_density(const PathBundle& bundle, const HestonParams& params) {
  return minimal_martingale_density_paths(bundle, params).col(bundle.steps());
}

std::vector<AdversaryRule> default_adversaries() {
  return {AdversaryRule::kPlusOne, AdversaryRule::kMinusOne, AdversaryRule::kPreviousIncrementSign,
          AdversaryRule::kRunningValueSign};
}

std::string to_string(AdversaryRule rule) {
  switch (rule) {
    case AdversaryRule::kPlusOne: return "plus_one";
    case AdversaryRule::kMinusOne: return "minus_one";
    case AdversaryRule::kPreviousIncrementSign: return "previous_increment_sign";
    case AdversaryRule::kRunningValueSign: return "running_value_sign";
  }
  return "unknown";
}

namespace {

double sign0(double v) { return v > 0.0 ? 1.0 : (v < 0.0 ? -1.0 : 0.0); }

}  // namespace

DistanceEstimate semimartingale_distance(const PathMatrix& X, const PathMatrix& Y,
                                         const std::vector<AdversaryRule>& adversaries) {
  if (adversaries.empty()) throw std::invalid_argument("adversary family must be nonempty");
  if (X.rows() != Y.rows() || X.cols() != Y.cols() || X.cols() < 2) {
    throw std::invalid_argument("semimartingale_distance: nonconformant paths");
  }
  DistanceEstimate out;
  const Index n = X.rows(), steps = X.cols() - 1;
  for (std::size_t a = 0; a < adversaries.size(); ++a) {
    const AdversaryRule rule = adversaries[a];
    VectorXd sample(n);
    parallel_for(static_cast<std::size_t>(n), [&](std::size_t begin, std::size_t end) {
      for (std::size_t i = begin; i < end; ++i) {
        const auto r = static_cast<Index>(i);
        double integral = 0.0, running = 0.0, prev = 0.0;
        for (Index k = 0; k < steps; ++k) {
          const double d = (X(r, k + 1) - Y(r, k + 1)) - (X(r, k) - Y(r, k));
          double theta = 0.0;
          switch (rule) {
            case AdversaryRule::kPlusOne: theta = 1.0; break;
            case AdversaryRule::kMinusOne: theta = -1.0; break;
            case AdversaryRule::kPreviousIncrementSign: theta = sign0(prev); break;
            case AdversaryRule::kRunningValueSign: theta = sign0(running); break;
          }
          integral += theta * d;
          running += d;
          prev = d;
        }
        sample(r) = std::min(std::abs(integral), 1.0);
      }
    });
    out.per_rule.push_back(make_estimate(sample));
    if (a == 0 || out.per_rule.back().mean > out.best.mean) {
      out.best = out.per_rule.back();
      out.argmax = rule;
    }
  }
  return out;
}

}  // namespace ustab
