#include "ustab/utility.hpp"

#include "ustab/types.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ustab {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

double segment_slope(const TabulatedKind& t, std::size_t i) {
  return (t.u[i + 1] - t.u[i]) / (t.x[i + 1] - t.x[i]);
}

// Index i of the segment [x_i, x_{i+1}) holding x, clamped to the last one.
std::size_t segment_of(const TabulatedKind& t, double x) {
  const auto it = std::upper_bound(t.x.begin(), t.x.end(), x);
  const std::size_t idx = static_cast<std::size_t>(it - t.x.begin());
  if (idx == 0) return 0;
  return std::min(idx - 1, t.x.size() - 2);
}

double power_eval(double p, double x) {
  if (x < 0.0) return -kInf;
  if (p == 0.0) return x == 0.0 ? -kInf : std::log(x);
  if (x == 0.0) return p > 0.0 ? 0.0 : -kInf;
  return std::pow(x, p) / p;
}

}  // namespace

UtilitySpec UtilitySpec::power(double p) {
  if (!(p < 1.0) || !std::isfinite(p)) throw std::invalid_argument("power utility needs p < 1");
  return UtilitySpec(PowerKind{p}, Domain::kPositiveHalfline);
}

UtilitySpec UtilitySpec::log() { return power(0.0); }

UtilitySpec UtilitySpec::exponential(double alpha) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("exponential utility needs alpha > 0");
  }
  return UtilitySpec(ExponentialKind{alpha}, Domain::kWholeLine);
}

UtilitySpec UtilitySpec::tabulated(std::vector<double> x, std::vector<double> u, Domain domain) {
  if (x.size() < 2 || x.size() != u.size()) {
    throw std::invalid_argument("tabulated utility needs at least two (x, U) knots");
  }
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (!std::isfinite(x[i]) || !std::isfinite(u[i])) {
      throw std::invalid_argument("tabulated utility knots must be finite");
    }
    if (i > 0 && !(x[i] > x[i - 1])) {
      throw std::invalid_argument("tabulated utility knots must be strictly increasing");
    }
  }
  if (domain == Domain::kPositiveHalfline && x.front() < 0.0) {
    throw std::invalid_argument("halfline tabulated utility cannot have negative knots");
  }
  TabulatedKind t{std::move(x), std::move(u)};
  double prev = kInf;
  for (std::size_t i = 0; i + 1 < t.x.size(); ++i) {
    const double s = segment_slope(t, i);
    if (!(s > 0.0)) throw std::invalid_argument("tabulated utility must be strictly increasing");
    if (!(s < prev)) throw std::invalid_argument("tabulated utility must be strictly concave");
    prev = s;
  }
  return UtilitySpec(std::move(t), domain);
}

std::string UtilitySpec::describe() const {
  std::ostringstream os;
  os.precision(17);
  std::visit(overloaded{[&](const PowerKind& k) {
                          if (k.p == 0.0) {
                            os << "log";
                          } else {
                            os << "power(p=" << k.p << ")";
                          }
                        },
                        [&](const ExponentialKind& k) { os << "exponential(alpha=" << k.alpha << ")"; },
                        [&](const TabulatedKind& k) { os << "tabulated(" << k.x.size() << " knots)"; }},
             kind_);
  return os.str();
}

double utility_eval(const UtilitySpec& spec, double x) {
  return std::visit(overloaded{[&](const PowerKind& k) { return power_eval(k.p, x); },
                               [&](const ExponentialKind& k) { return -std::exp(-k.alpha * x); },
                               [&](const TabulatedKind& t) {
                                 if (x < t.x.front()) return -kInf;
                                 const std::size_t i = segment_of(t, x);
                                 return t.u[i] + segment_slope(t, i) * (x - t.x[i]);
                               }},
                    spec.kind());
}

double utility_marginal(const UtilitySpec& spec, double x) {
  return std::visit(overloaded{[&](const PowerKind& k) {
                                 if (x <= 0.0) return kInf;
                                 return k.p == 0.0 ? 1.0 / x : std::pow(x, k.p - 1.0);
                               },
                               [&](const ExponentialKind& k) {
                                 return k.alpha * std::exp(-k.alpha * x);
                               },
                               [&](const TabulatedKind& t) {
                                 if (x < t.x.front()) return kInf;
                                 return segment_slope(t, segment_of(t, x));
                               }},
                    spec.kind());
}

double inverse_marginal(const UtilitySpec& spec, double y) {
  if (!(y > 0.0)) throw std::invalid_argument("inverse marginal needs y > 0");
  return std::visit(overloaded{[&](const PowerKind& k) {
                                 return k.p == 0.0 ? 1.0 / y : std::pow(y, 1.0 / (k.p - 1.0));
                               },
                               [&](const ExponentialKind& k) { return -std::log(y / k.alpha) / k.alpha; },
                               [&](const TabulatedKind& t) {
                                 // First knot whose right slope is at most y.
                                 for (std::size_t i = 0; i + 1 < t.x.size(); ++i) {
                                   if (segment_slope(t, i) <= y) return t.x[i];
                                 }
                                 return segment_slope(t, t.x.size() - 2) == y ? t.x.back() : kInf;
                               }},
                    spec.kind());
}

double ConjugatePair::value(double y) const {
  if (!(y > 0.0)) throw std::invalid_argument("conjugate needs y > 0");
  return std::visit(
      overloaded{[&](const PowerKind& k) {
                   if (k.p == 0.0) return -std::log(y) - 1.0;
                   return (1.0 - k.p) / k.p * std::pow(y, k.p / (k.p - 1.0));
                 },
                 [&](const ExponentialKind& k) {
                   const double r = y / k.alpha;
                   return r * (std::log(r) - 1.0);
                 },
                 [&](const TabulatedKind& t) {
                   if (y < segment_slope(t, t.x.size() - 2)) return kInf;
                   const auto objective = [&](double x) { return utility_eval(utility_, x) - x * y; };
                   double best = maximize_on_interval(objective, t.x.front(), t.x.back()).value;
                   for (std::size_t i = 0; i < t.x.size(); ++i) best = std::max(best, t.u[i] - t.x[i] * y);
                   return best;
                 }},
      utility_.kind());
}

double ConjugatePair::derivative(double y) const { return -inverse_marginal(utility_, y); }

double conjugate_eval(const ConjugatePair& pair, double y) { return pair.value(y); }

double conjugate_derivative(const ConjugatePair& pair, double y) { return pair.derivative(y); }

double constrained_conjugate(const ConjugatePair& pair, double y, double z, double phi_min) {
  if (!pair.utility().halfline()) {
    throw std::invalid_argument("constrained conjugate is defined for halfline utilities");
  }
  if (!(y > 0.0)) throw std::invalid_argument("constrained conjugate needs y > 0");
  if (z < phi_min) throw std::invalid_argument("constrained conjugate needs z >= phi_min");
  const double w = z - phi_min;
  if (y < utility_marginal(pair.utility(), w)) return pair.value(y) + y * z;
  return utility_eval(pair.utility(), w) + y * phi_min;
}

std::vector<double> geometric_probe(double lo, double hi, int per_decade) {
  if (!(lo > 0.0) || !(hi > lo) || per_decade < 1) {
    throw std::invalid_argument("geometric probe needs 0 < lo < hi");
  }
  const int n = static_cast<int>(std::ceil(std::log10(hi / lo) * per_decade));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(n) + 1);
  for (int i = 0; i <= n; ++i) grid.push_back(lo * std::pow(hi / lo, static_cast<double>(i) / n));
  grid.back() = hi;
  return grid;
}

ElasticityReport asymptotic_elasticity(const UtilitySpec& spec, std::span<const double> probe) {
  double top = 0.0;
  for (double v : probe) {
    if (!(v > 0.0)) throw std::invalid_argument("elasticity probe points must be positive");
    top = std::max(top, v);
  }
  if (top < 1e6) throw std::invalid_argument("elasticity probe must reach 1e6");

  const double shift = spec.halfline() ? 0.0 : 1.0 - utility_eval(spec, 0.0);
  const auto* expo = std::get_if<ExponentialKind>(&spec.kind());
  const auto ratio = [&](double x) {
    if (expo) return x * expo->alpha / (2.0 * std::exp(expo->alpha * x) - 1.0);
    return x * utility_marginal(spec, x) / (utility_eval(spec, x) + shift);
  };

  ElasticityReport r;
  double sup = -kInf, inf = kInf;
  for (double v : probe) {
    if (v < top / 10.0) continue;
    sup = std::max(sup, ratio(v));
    if (!spec.halfline()) inf = std::min(inf, ratio(-v));
  }
  r.ae_plus = sup;
  r.plus_ok = sup < 1.0;
  if (!spec.halfline()) {
    r.ae_minus = inf;
    r.minus_ok = inf > 1.0;
  }
  return r;
}

std::pair<double, double> exp_identity_check(double alpha, double y, double c) {
  if (!(y > 0.0)) throw std::invalid_argument("identity check needs y > 0");
  const ConjugatePair pair(UtilitySpec::exponential(alpha));
  const double first = pair.derivative(c * y) - pair.derivative(y) - std::log(c) / alpha;
  const double second =
      pair.value(y) + y * c - y * (pair.derivative(y * std::exp(alpha * c)) - 1.0 / alpha);
  return {first, second};
}

ScalarMax maximize_on_interval(const std::function<double(double)>& f, double lo, double hi,
                               int coarse_points, double tol) {
  if (!(hi >= lo) || coarse_points < 3) throw std::invalid_argument("bad maximization interval");
  if (hi == lo) return {lo, f(lo)};
  const double h = (hi - lo) / (coarse_points - 1);
  int best = 0;
  double best_value = -kInf;
  for (int i = 0; i < coarse_points; ++i) {
    const double v = f(lo + h * i);
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  double a = lo + h * std::max(0, best - 1);
  double b = lo + h * std::min(coarse_points - 1, best + 1);
  const double g = (std::sqrt(5.0) - 1.0) / 2.0;
  double c = b - g * (b - a), d = a + g * (b - a);
  double fc = f(c), fd = f(d);
  while (b - a > tol) {
    if (fc >= fd) {
      b = d;
      d = c;
      fd = fc;
      c = b - g * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = d;
      fc = fd;
      d = a + g * (b - a);
      fd = f(d);
    }
  }
  ScalarMax out{best_value > std::max(fc, fd) ? lo + h * best : (fc >= fd ? c : d),
                std::max({best_value, fc, fd})};
  return out;
}

}  // namespace ustab
