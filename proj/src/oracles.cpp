#include "ustab/oracles.hpp"

#include <Eigen/Eigenvalues>

#include <cmath>

namespace ustab {

double gaussian_expectation(const std::function<double(double)>& g, double mean, double sd, int nodes) {
  Eigen::MatrixXd jacobi = Eigen::MatrixXd::Zero(nodes, nodes);
  for (int k = 1; k < nodes; ++k) jacobi(k, k - 1) = jacobi(k - 1, k) = std::sqrt(double(k));
  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(jacobi);
  double acc = 0.0;
  for (int i = 0; i < nodes; ++i) {
    const double w = eig.eigenvectors()(0, i) * eig.eigenvectors()(0, i);
    acc += w * g(mean + sd * eig.eigenvalues()(i));
  }
  return acc;
}

double cir_bond_price(const HestonParams& p, double u) {
  const double k = p.kappa(), th = p.theta(), s = p.sigma(), T = p.horizon();
  const double g = std::sqrt(k * k + 2.0 * s * s * u);
  const double e = std::expm1(g * T);
  const double den = (g + k) * e + 2.0 * g;
  const double b = 2.0 * u * e / den;
  const double log_a = (2.0 * k * th / (s * s)) * std::log(2.0 * g * std::exp(0.5 * (k + g) * T) / den);
  return std::exp(log_a - b * p.v0());
}

}  // namespace ustab
