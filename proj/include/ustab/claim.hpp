#pragma once

#include <functional>
#include <iosfwd>
#include <string>
#include <vector>

namespace ustab {

// Which driving Brownian motion the claim is written on.
enum class Underlying { kB, kW };

// Bounded continuous payoff phi, tabulated: linear between knots, constant
// outside.  phi_min / phi_max are declared bounds checked against every knot.
class ClaimSpec {
 public:
  ClaimSpec(std::vector<double> knots, std::vector<double> values, double phi_min, double phi_max,
            Underlying underlying = Underlying::kB);

  static ClaimSpec constant(double c);
  // 1{z >= 0}, approximated by a ramp of width 1e-12 left of zero.
  static ClaimSpec indicator_nonnegative();
  // Rises linearly from 0 at lo to 1 at hi.
  static ClaimSpec call_spread(double lo, double hi);
  // Falls linearly from 1 at lo to 0 at hi.
  static ClaimSpec put_spread(double lo, double hi);
  // 1 / (1 + exp(-z)), sampled on [-40, 40] with spacing 0.005.
  static ClaimSpec logistic();
  // Samples fn on [lo, hi] with the given spacing and declared bounds.
  static ClaimSpec from_function(const std::function<double(double)>& fn, double lo, double hi,
                                 double spacing, double phi_min, double phi_max);

  double operator()(double z) const;

  double phi_min() const { return phi_min_; }
  double phi_max() const { return phi_max_; }
  Underlying underlying() const { return underlying_; }
  const std::vector<double>& knots() const { return knots_; }
  const std::vector<double>& values() const { return values_; }
  bool is_constant() const { return constant_; }
  ClaimSpec on(Underlying u) const;

 private:
  std::vector<double> knots_;
  std::vector<double> values_;
  double phi_min_;
  double phi_max_;
  Underlying underlying_;
  bool constant_;
};

// Two-column text: "knot value" per line, '#' starts a comment, knots
// strictly increasing.  Bounds default to the min / max of the values.
ClaimSpec load_claim_table(std::istream& in);
ClaimSpec load_claim_table_file(const std::string& path);

}  // namespace ustab
