#include "ustab/claim.hpp"

#include "ustab/errors.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <sstream>
#include <stdexcept>

namespace ustab {

ClaimSpec::ClaimSpec(std::vector<double> knots, std::vector<double> values, double phi_min,
                     double phi_max, Underlying underlying)
    : knots_(std::move(knots)),
      values_(std::move(values)),
      phi_min_(phi_min),
      phi_max_(phi_max),
      underlying_(underlying) {
  if (knots_.empty() || knots_.size() != values_.size()) {
    throw ConfigError("claim", "knots and values must be nonempty and of equal length");
  }
  if (!std::isfinite(phi_min_) || !std::isfinite(phi_max_) || phi_min_ > phi_max_) {
    throw ConfigError("claim", "phi_min and phi_max must be finite with phi_min <= phi_max");
  }
  for (std::size_t i = 0; i < knots_.size(); ++i) {
    if (!std::isfinite(knots_[i]) || !std::isfinite(values_[i])) {
      throw ConfigError("claim", "knots and values must be finite");
    }
    if (i > 0 && !(knots_[i] > knots_[i - 1])) {
      throw ConfigError("claim", "knots must be strictly increasing");
    }
    if (values_[i] < phi_min_ || values_[i] > phi_max_) {
      throw ConfigError("claim", "value outside the declared [phi_min, phi_max]");
    }
  }
  constant_ = std::all_of(values_.begin(), values_.end(),
                          [&](double v) { return v == values_.front(); });
}

ClaimSpec ClaimSpec::constant(double c) { return ClaimSpec({0.0}, {c}, c, c); }

ClaimSpec ClaimSpec::indicator_nonnegative() {
  return ClaimSpec({-1e-12, 0.0}, {0.0, 1.0}, 0.0, 1.0);
}

ClaimSpec ClaimSpec::call_spread(double lo, double hi) {
  if (!(hi > lo)) throw ConfigError("claim", "call spread needs lo < hi");
  return ClaimSpec({lo, hi}, {0.0, 1.0}, 0.0, 1.0);
}

ClaimSpec ClaimSpec::put_spread(double lo, double hi) {
  if (!(hi > lo)) throw ConfigError("claim", "put spread needs lo < hi");
  return ClaimSpec({lo, hi}, {1.0, 0.0}, 0.0, 1.0);
}

ClaimSpec ClaimSpec::logistic() {
  return from_function([](double z) { return 1.0 / (1.0 + std::exp(-z)); }, -40.0, 40.0, 0.005, 0.0,
                       1.0);
}

ClaimSpec ClaimSpec::from_function(const std::function<double(double)>& fn, double lo, double hi,
                                   double spacing, double phi_min, double phi_max) {
  if (!(hi > lo) || !(spacing > 0.0)) throw ConfigError("claim", "bad sampling interval");
  const auto n = static_cast<std::size_t>(std::ceil((hi - lo) / spacing));
  std::vector<double> z(n + 1), v(n + 1);
  for (std::size_t i = 0; i <= n; ++i) {
    z[i] = i == n ? hi : lo + spacing * static_cast<double>(i);
    v[i] = fn(z[i]);
  }
  return ClaimSpec(std::move(z), std::move(v), phi_min, phi_max);
}

double ClaimSpec::operator()(double z) const {
  if (z <= knots_.front()) return values_.front();
  if (z >= knots_.back()) return values_.back();
  const auto it = std::upper_bound(knots_.begin(), knots_.end(), z);
  const std::size_t i = static_cast<std::size_t>(it - knots_.begin()) - 1;
  const double w = (z - knots_[i]) / (knots_[i + 1] - knots_[i]);
  return values_[i] + w * (values_[i + 1] - values_[i]);
}

ClaimSpec ClaimSpec::on(Underlying u) const {
  ClaimSpec c = *this;
  c.underlying_ = u;
  return c;
}

ClaimSpec load_claim_table(std::istream& in) {
  std::vector<double> z, v;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (const auto hash = line.find('#'); hash != std::string::npos) line.erase(hash);
    std::istringstream row(line);
    double a, b;
    if (!(row >> a)) continue;
    if (!(row >> b)) {
      throw ConfigError("claim_table", "line " + std::to_string(lineno) + " needs two columns");
    }
    std::string extra;
    if (row >> extra) {
      throw ConfigError("claim_table", "line " + std::to_string(lineno) + " has extra columns");
    }
    z.push_back(a);
    v.push_back(b);
  }
  if (z.empty()) throw ConfigError("claim_table", "no knots");
  const auto [lo, hi] = std::minmax_element(v.begin(), v.end());
  const double phi_min = *lo, phi_max = *hi;
  return ClaimSpec(std::move(z), std::move(v), phi_min, phi_max);
}

ClaimSpec load_claim_table_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("claim_table", "cannot open " + path);
  return load_claim_table(in);
}

}  // namespace ustab
