#include "ustab/lsmc.hpp"

#include "ustab/parallel.hpp"

#include <Eigen/QR>

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ustab {

ResidualReport hedge_residual(const StrategySpec& strategy, double price, const ClaimSpec& claim,
                              const PathBundle& bundle) {
  const VectorXd f = claim_payoffs(claim, bundle);
  VectorXd resid(bundle.paths());
  parallel_for(static_cast<std::size_t>(bundle.paths()), [&](std::size_t begin, std::size_t end) {
    std::vector<double> h(static_cast<std::size_t>(bundle.steps()));
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      holdings_row(strategy, bundle, r, h);
      double x = 0.0;
      for (int k = 0; k < bundle.steps(); ++k) x += h[static_cast<std::size_t>(k)] * bundle.dS(r, k);
      resid(r) = price + x - f(r);
    }
  });
  ResidualReport rep;
  rep.price = price;
  const Estimate e = make_estimate(resid);
  rep.mean = e.mean;
  const double n = static_cast<double>(resid.size());
  rep.variance = n > 1 ? e.std_error * e.std_error * n : 0.0;
  rep.sd = std::sqrt(rep.variance);
  return rep;
}

LsmcHedge lsmc_hedge(const ClaimSpec& claim, const PathBundle& bundle, const RegressionBasis& basis) {
  if (bundle.rho != 0.0) throw std::invalid_argument("lsmc hedge needs a rho = 0 bundle");
  basis.validate(bundle.grid);
  const int m = basis.size();
  const Index cols = static_cast<Index>(basis.buckets) * m;

  LsmcHedge out;
  out.strategy.kind = StrategyKind::kRegression;
  out.strategy.basis = basis;
  out.strategy.coeffs = VectorXd::Zero(cols);
  if (claim.is_constant()) {
    out.report.price = claim.values().front();
    out.report.columns = cols + 1;
    out.report.rank = 1;
    out.report.mean = 0.0;
    return out;
  }

  const VectorXd f = claim_payoffs(claim, bundle);
  Eigen::MatrixXd design(bundle.paths(), cols + 1);
  parallel_for(static_cast<std::size_t>(bundle.paths()), [&](std::size_t begin, std::size_t end) {
    std::vector<double> phi(static_cast<std::size_t>(m));
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      design(r, 0) = 1.0;
      for (Index c = 1; c <= cols; ++c) design(r, c) = 0.0;
      for (int k = 0; k < bundle.steps(); ++k) {
        regression_features(basis, bundle.grid, k, bundle.B(r, k), bundle.V(r, k), phi);
        const Index base = 1 + static_cast<Index>(bucket_of_step(k, bundle.steps(), basis.buckets)) * m;
        for (int j = 0; j < m; ++j) design(r, base + j) += phi[static_cast<std::size_t>(j)] * bundle.dS(r, k);
      }
    }
  });

  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(design);
  qr.setThreshold(1e-10);
  const Index rank = qr.rank();
  VectorXd beta = VectorXd::Zero(cols + 1);
  if (rank == cols + 1) {
    beta = qr.solve(f);
  } else {
    // Refit on the leading pivot columns only.
    Eigen::MatrixXd reduced(design.rows(), rank);
    std::vector<Index> kept;
    for (Index j = 0; j < rank; ++j) {
      kept.push_back(qr.colsPermutation().indices()(j));
      reduced.col(j) = design.col(kept.back());
    }
    const VectorXd sub = reduced.colPivHouseholderQr().solve(f);
    for (Index j = 0; j < rank; ++j) beta(kept[static_cast<std::size_t>(j)]) = sub(j);
    std::ostringstream os;
    os << "regression rank " << rank << " < " << cols + 1 << " columns; dropped "
       << cols + 1 - rank << " basis columns";
    out.report.warnings.push_back(os.str());
  }
  out.strategy.coeffs = beta.tail(cols);
  const auto warnings = out.report.warnings;
  out.report = hedge_residual(out.strategy, beta(0), claim, bundle);
  out.report.warnings = warnings;
  out.report.rank = rank;
  out.report.columns = cols + 1;
  return out;
}

}  // namespace ustab
