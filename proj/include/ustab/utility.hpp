#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <variant>
#include <vector>

namespace ustab {

enum class Domain { kPositiveHalfline, kWholeLine };

struct PowerKind {
  double p;  // p < 1; p == 0 is log
};
struct ExponentialKind {
  double alpha;  // alpha > 0
};
// Piecewise linear through the knots, -inf left of the first knot, extended
// linearly with the last slope to the right.
struct TabulatedKind {
  std::vector<double> x;
  std::vector<double> u;
};

class UtilitySpec {
 public:
  using Kind = std::variant<PowerKind, ExponentialKind, TabulatedKind>;

  static UtilitySpec power(double p);
  static UtilitySpec log();
  static UtilitySpec exponential(double alpha);
  static UtilitySpec tabulated(std::vector<double> x, std::vector<double> u, Domain domain);

  const Kind& kind() const { return kind_; }
  Domain domain() const { return domain_; }
  bool halfline() const { return domain_ == Domain::kPositiveHalfline; }
  std::string describe() const;

 private:
  UtilitySpec(Kind kind, Domain domain) : kind_(std::move(kind)), domain_(domain) {}

  Kind kind_;
  Domain domain_;
};

// U(x); -inf outside the domain.
double utility_eval(const UtilitySpec& spec, double x);
// U'(x) (right derivative for tabulated); +inf where U' blows up or x is
// left of the domain.
double utility_marginal(const UtilitySpec& spec, double x);
// I = (U')^{-1}; for tabulated, the maximizing knot of U(x) - xy.
double inverse_marginal(const UtilitySpec& spec, double y);

// A utility together with its Fenchel conjugate V(y) = sup_x {U(x) - xy}.
class ConjugatePair {
 public:
  explicit ConjugatePair(UtilitySpec utility) : utility_(std::move(utility)) {}

  const UtilitySpec& utility() const { return utility_; }
  double value(double y) const;
  double derivative(double y) const;

 private:
  UtilitySpec utility_;
};

double conjugate_eval(const ConjugatePair& pair, double y);
double conjugate_derivative(const ConjugatePair& pair, double y);

// sup_{x > -phi_min} {U(x + z) - xy} for a halfline utility and z >= phi_min.
double constrained_conjugate(const ConjugatePair& pair, double y, double z, double phi_min);

struct ElasticityReport {
  double ae_plus = 0.0;
  std::optional<double> ae_minus;
  bool plus_ok = false;               // ae_plus < 1
  std::optional<bool> minus_ok;       // ae_minus > 1
};

// Empirical x U'(x) / U(x) over the outermost decade of a positive probe grid.
// Whole-line utilities are normalized to U - U(0) + 1 and probed on both
// tails.  The grid must reach 1e6.
ElasticityReport asymptotic_elasticity(const UtilitySpec& spec, std::span<const double> probe);

// Geometric grid from lo to hi with the given number of points per decade.
std::vector<double> geometric_probe(double lo, double hi, int per_decade = 10);

// Residuals of the two exponential-conjugate identities
//   V'(cy) - V'(y) - log(c)/alpha
//   V(y) + yc - y (V'(y e^{alpha c}) - 1/alpha)
std::pair<double, double> exp_identity_check(double alpha, double y, double c);

struct ScalarMax {
  double argmax;
  double value;
};

// Coarse scan of f on [lo, hi] followed by golden-section refinement around
// the best scan point; exact for concave f up to tol.
ScalarMax maximize_on_interval(const std::function<double(double)>& f, double lo, double hi,
                               int coarse_points = 2001, double tol = 1e-8);

}  // namespace ustab
