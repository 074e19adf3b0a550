#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <limits>
#include <span>
#include <vector>

namespace ustab {

// One row per path, one column per grid node (or step).
template <typename Scalar>
using PathMatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using PathMatrix = PathMatrixX<double>;

using Eigen::Index;
using Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();
inline constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();

// Monte Carlo mean with its standard error.
struct Estimate {
  double mean = 0.0;
  double std_error = 0.0;  // sample sd over sqrt(paths)
  std::int64_t paths = 0;
  double confidence = 0.95;
  std::int64_t nonfinite = 0;  // samples equal to -inf

  double se() const { return std_error; }
  double z() const;
  double ci_lower() const { return mean - z() * std_error; }
  double ci_upper() const { return mean + z() * std_error; }
};

// Sequential-order mean and sample standard error; any -inf sample yields a
// -inf mean.  NaN samples throw std::domain_error.
Estimate make_estimate(std::span<const double> samples, double confidence = 0.95);
inline Estimate make_estimate(const VectorXd& samples, double confidence = 0.95) {
  return make_estimate(std::span<const double>(samples.data(), static_cast<std::size_t>(samples.size())),
                       confidence);
}

// sqrt(a.se^2 + b.se^2)
double combined_se(const Estimate& a, const Estimate& b);

// Two-sided standard-normal quantile for a confidence level in (0, 1).
double normal_quantile_two_sided(double confidence);

}  // namespace ustab
