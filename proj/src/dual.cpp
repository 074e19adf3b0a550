#include "ustab/dual.hpp"

#include "ustab/nelder_mead.hpp"
#include "ustab/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ustab {

DualCandidate DualCandidate::zero(int buckets, double cap) {
  if (buckets < 1) throw std::invalid_argument("dual candidate needs at least one bucket");
  return DualCandidate{buckets, Eigen::MatrixXd::Zero(buckets, 3), cap};
}

std::string DualCandidate::id() const {
  std::ostringstream os;
  os.precision(6);
  os << "nu[";
  for (Index i = 0; i < coeffs.rows(); ++i) {
    if (i) os << ';';
    os << coeffs(i, 0) << ' ' << coeffs(i, 1) << ' ' << coeffs(i, 2);
  }
  os << "]cap" << cap;
  return os.str();
}

namespace {

void check_candidate(const PathBundle& bundle, const DualCandidate& c) {
  if (c.buckets < 1 || c.coeffs.rows() != c.buckets || c.coeffs.cols() != 3) {
    throw std::invalid_argument("dual candidate coefficients must be buckets x 3");
  }
  if (!(c.cap > 1.0)) throw std::invalid_argument("dual candidate cap must exceed 1");
  if (c.buckets > bundle.steps()) throw std::invalid_argument("more buckets than steps");
  if (!c.coeffs.allFinite()) throw std::invalid_argument("dual candidate coefficients must be finite");
}

int bucket_of(int k, int steps, int buckets) {
  return static_cast<int>(static_cast<long long>(k) * buckets / steps);
}

// Writes E(L) along one path into out (length N + 1), returns the terminal value.
double density_path(const PathBundle& bundle, const DualCandidate& c, const RandomStream& stream,
                    Index r, double* out) {
  const double dt = bundle.grid.dt();
  const double rho = bundle.rho;
  const double perp = std::sqrt(1.0 - rho * rho);
  const double log_cap = std::log(c.cap);
  double a = 0.0, value = 1.0;
  bool frozen = false;
  if (out) out[0] = 1.0;
  for (int k = 0; k < bundle.steps(); ++k) {
    if (!frozen) {
      const int j = bucket_of(k, bundle.steps(), c.buckets);
      const double nu = c.coeffs(j, 0) + c.coeffs(j, 1) * bundle.V(r, k) + c.coeffs(j, 2) * bundle.B(r, k);
      const double dw_perp = perp * (bundle.W(r, k + 1) - bundle.W(r, k)) -
                             rho * (bundle.B(r, k + 1) - bundle.B(r, k));
      const double b = a + nu * dw_perp - 0.5 * nu * nu * dt;
      bool hit = b >= log_cap;
      if (!hit && nu != 0.0) {
        const double exponent = -2.0 * (log_cap - a) * (log_cap - b) / (nu * nu * dt);
        if (exponent > -745.0) {
          const double u = stream.uniform(StreamTag::kDualBridge, static_cast<std::uint64_t>(r),
                                          static_cast<std::uint32_t>(k));
          hit = u < std::exp(exponent);
        }
      }
      if (hit) {
        frozen = true;
        value = c.cap;
      } else {
        a = b;
        // min() guards only against exp rounding above the cap.
        value = std::min(std::exp(a), c.cap);
      }
      if (!(value > 0.0) || value > c.cap) {
        throw std::logic_error("stochastic exponential left (0, cap]");
      }
    }
    if (out) out[k + 1] = value;
  }
  return value;
}

}  // namespace

PathMatrix candidate_density_paths(const PathBundle& bundle, const DualCandidate& candidate) {
  check_candidate(bundle, candidate);
  const RandomStream stream(bundle.seed);
  PathMatrix E(bundle.paths(), bundle.steps() + 1);
  parallel_for(static_cast<std::size_t>(bundle.paths()), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      density_path(bundle, candidate, stream, r, E.row(r).data());
    }
  });
  return E;
}

VectorXd candidate_density(const PathBundle& bundle, const DualCandidate& candidate) {
  check_candidate(bundle, candidate);
  const RandomStream stream(bundle.seed);
  VectorXd E(bundle.paths());
  parallel_for(static_cast<std::size_t>(bundle.paths()), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      E(r) = density_path(bundle, candidate, stream, r, nullptr);
    }
  });
  return E;
}

double dual_integrand(const ConjugatePair& pair, const ClaimSpec* claim, double y, double density,
                      double payoff) {
  const double yd = y * density;
  if (pair.utility().halfline() && claim) {
    return constrained_conjugate(pair, yd, payoff, claim->phi_min());
  }
  return pair.value(yd) + (claim ? yd * payoff : 0.0);
}

Estimate dual_bound_density(double y, const ConjugatePair& pair, const ClaimSpec* claim,
                            const VectorXd& payoffs, const VectorXd& densities) {
  if (!(y > 0.0)) throw std::invalid_argument("dual bound needs y > 0");
  if (payoffs.size() != densities.size()) throw std::invalid_argument("payoff/density size mismatch");
  VectorXd sample(densities.size());
  parallel_for(static_cast<std::size_t>(densities.size()), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      sample(r) = dual_integrand(pair, claim, y, densities(r), payoffs(r));
    }
  });
  const Estimate e = make_estimate(sample);
  if (e.nonfinite > 0) throw std::domain_error("dual bound has -inf samples");
  return e;
}

namespace {

VectorXd payoffs_or_zero(const ClaimSpec* claim, const PathBundle& bundle) {
  return claim ? claim_payoffs(*claim, bundle) : VectorXd::Zero(bundle.paths());
}

}  // namespace

Estimate dual_bound_mmm(double y, const ConjugatePair& pair, const ClaimSpec* claim,
                        const PathBundle& bundle) {
  return dual_bound_density(y, pair, claim, payoffs_or_zero(claim, bundle),
                            bundle.Z.col(bundle.steps()));
}

Estimate dual_bound_perturbed(double y, const ConjugatePair& pair, const ClaimSpec* claim,
                              const PathBundle& bundle, const DualCandidate& candidate) {
  const VectorXd d = bundle.Z.col(bundle.steps()).cwiseProduct(candidate_density(bundle, candidate));
  return dual_bound_density(y, pair, claim, payoffs_or_zero(claim, bundle), d);
}

DualOptimum minimize_dual(double y, const ConjugatePair& pair, const ClaimSpec* claim,
                          const PathBundle& bundle, const DualFamily& family, int budget) {
  if (budget <= 0) throw std::invalid_argument("dual optimizer budget must be positive");
  if (family.lo.rows() != family.buckets || family.lo.cols() != 3 ||
      family.hi.rows() != family.buckets || family.hi.cols() != 3) {
    throw std::invalid_argument("dual family box must be buckets x 3");
  }
  const Index dim = 3 * family.buckets;
  const auto unpack = [&](const VectorXd& v) {
    DualCandidate c = DualCandidate::zero(family.buckets, family.cap);
    for (Index i = 0; i < dim; ++i) c.coeffs(i / 3, i % 3) = v(i);
    return c;
  };
  VectorXd lo(dim), hi(dim);
  for (Index i = 0; i < dim; ++i) {
    lo(i) = family.lo(i / 3, i % 3);
    hi(i) = family.hi(i / 3, i % 3);
  }
  const VectorXd payoffs = payoffs_or_zero(claim, bundle);
  const VectorXd z = bundle.Z.col(bundle.steps());
  const auto objective = [&](const VectorXd& v) {
    const VectorXd d = z.cwiseProduct(candidate_density(bundle, unpack(v)));
    return dual_bound_density(y, pair, claim, payoffs, d).mean;
  };
  const BoxMinimum m = minimize_in_box(objective, lo, hi, VectorXd::Zero(dim), budget);
  DualOptimum out;
  out.candidate = unpack(m.argmin);
  out.estimate = dual_bound_perturbed(y, pair, claim, bundle, out.candidate);
  out.evaluations = m.evaluations;
  return out;
}

Estimate subreplication_estimate(const HestonParams& params, const ClaimSpec& claim, double x,
                                 double t_prime, const PathBundle& bundle) {
  const double T = bundle.grid.horizon();
  if (!(t_prime < T)) throw std::invalid_argument("handoff time must be before the horizon");
  if (!(t_prime > 0.0)) throw std::invalid_argument("handoff time must be positive");
  if (params.rho() == 0.0) throw std::invalid_argument("subreplication needs rho != 0");
  const int n = bundle.steps();
  const double dt = bundle.grid.dt();
  const double pos = t_prime / dt;
  const int k = static_cast<int>(std::floor(pos + 1e-9));
  const bool on_node = std::abs(pos - std::round(pos)) < 1e-9;
  const int node = static_cast<int>(std::round(pos));
  const PathMatrix& B = claim.underlying() == Underlying::kB ? bundle.B : bundle.W;
  const RandomStream stream(bundle.seed);
  VectorXd sample(bundle.paths());
  parallel_for(static_cast<std::size_t>(bundle.paths()), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      double b_handoff;
      if (on_node) {
        b_handoff = B(r, node);
      } else {
        const double s = t_prime - bundle.grid.time(k);
        const double w = s / dt;
        const double g =
            stream.normal_pair(StreamTag::kHandoffBridge, i, static_cast<std::uint32_t>(k)).first;
        b_handoff = B(r, k) + w * (B(r, k + 1) - B(r, k)) + std::sqrt(s * (dt - s) / dt) * g;
      }
      sample(r) = claim(B(r, n) - b_handoff + x);
    }
  });
  return make_estimate(sample);
}

}  // namespace ustab
