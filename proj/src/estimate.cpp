#include "ustab/types.hpp"

#include <cmath>
#include <stdexcept>

namespace ustab {

double normal_quantile_two_sided(double confidence) {
  if (!(confidence > 0.0 && confidence < 1.0)) {
    throw std::invalid_argument("confidence must lie in (0, 1)");
  }
  // Solve erfc(z / sqrt 2) = 1 - confidence by bisection; erfc is monotone.
  const double tail = 1.0 - confidence;
  double lo = 0.0, hi = 40.0;
  for (int i = 0; i < 200; ++i) {
    const double mid = 0.5 * (lo + hi);
    if (std::erfc(mid / std::sqrt(2.0)) > tail) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return 0.5 * (lo + hi);
}

double Estimate::z() const { return normal_quantile_two_sided(confidence); }

Estimate make_estimate(std::span<const double> samples, double confidence) {
  Estimate e;
  e.paths = static_cast<std::int64_t>(samples.size());
  e.confidence = confidence;
  if (samples.empty()) throw std::invalid_argument("estimate needs at least one sample");
  // Shifted by the first sample: constant samples give that constant exactly.
  const double shift = samples.front();
  double sum = 0.0;
  for (double s : samples) {
    if (std::isnan(s)) throw std::domain_error("NaN sample in Monte Carlo average");
    if (s == -kInf) ++e.nonfinite;
    if (s == kInf) throw std::domain_error("+inf sample in Monte Carlo average");
    sum += s - shift;
  }
  if (e.nonfinite > 0) {
    e.mean = -kInf;
    e.std_error = 0.0;
    return e;
  }
  const double n = static_cast<double>(samples.size());
  e.mean = shift + sum / n;
  if (samples.size() > 1) {
    double ss = 0.0;
    for (double s : samples) ss += (s - e.mean) * (s - e.mean);
    e.std_error = std::sqrt(ss / (n - 1.0) / n);
  }
  return e;
}

double combined_se(const Estimate& a, const Estimate& b) {
  return std::sqrt(a.std_error * a.std_error + b.std_error * b.std_error);
}

}  // namespace ustab
