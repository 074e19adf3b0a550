#include "ustab/kw.hpp"

#include "ustab/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace ustab {

namespace {

void check_conformant(const std::vector<PathMatrix>& a, const std::vector<PathMatrix>& b) {
  if (a.empty() || a.size() != b.size()) throw std::invalid_argument("kw: dimension mismatch");
  for (std::size_t j = 0; j < a.size(); ++j) {
    if (a[j].rows() != b[j].rows() || a[j].cols() != b[j].cols() || a[j].rows() != a[0].rows() ||
        a[j].cols() != a[0].cols()) {
      throw std::invalid_argument("kw: nonconformant arrays");
    }
  }
}

}  // namespace

ProjectionResult kw_decompose(const std::vector<PathMatrix>& nu, const std::vector<PathMatrix>& sigma,
                              const std::vector<PathMatrix>& dB, double dt) {
  check_conformant(nu, sigma);
  check_conformant(nu, dB);
  const std::size_t d = nu.size();
  const Index paths = nu[0].rows(), steps = nu[0].cols();
  ProjectionResult out;
  out.H.resize(paths, steps);
  out.residual.resize(paths, steps);
  out.projected_qv.resize(paths);
  out.residual_qv.resize(paths);
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      double proj = 0.0, resid = 0.0;
      for (Index k = 0; k < steps; ++k) {
        double dot = 0.0, norm2 = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          dot += nu[j](r, k) * sigma[j](r, k);
          norm2 += sigma[j](r, k) * sigma[j](r, k);
        }
        const double h = norm2 != 0.0 ? dot / norm2 : 0.0;
        double dl = 0.0, rq = 0.0;
        for (std::size_t j = 0; j < d; ++j) {
          const double e = nu[j](r, k) - h * sigma[j](r, k);
          dl += e * dB[j](r, k);
          rq += e * e;
        }
        out.H(r, k) = h;
        out.residual(r, k) = dl;
        proj += h * h * norm2 * dt;
        resid += rq * dt;
      }
      out.projected_qv(r) = proj;
      out.residual_qv(r) = resid;
    }
  });
  out.energy = make_estimate(out.projected_qv);
  return out;
}

std::vector<PathMatrix> evaluate_integrand(const IntegrandFn& nu, const GeneralMarketPaths& market) {
  const int d = market.dimension;
  const Index paths = market.paths();
  const int steps = market.grid.steps();
  std::vector<PathMatrix> out(static_cast<std::size_t>(d), PathMatrix(paths, steps));
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t begin, std::size_t end) {
    std::vector<double> b(static_cast<std::size_t>(d)), v(static_cast<std::size_t>(d));
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      for (int k = 0; k < steps; ++k) {
        for (int j = 0; j < d; ++j) b[static_cast<std::size_t>(j)] = market.B[static_cast<std::size_t>(j)](r, k);
        nu(market.grid.time(k), b, v);
        for (int j = 0; j < d; ++j) out[static_cast<std::size_t>(j)](r, k) = v[static_cast<std::size_t>(j)];
      }
    }
  });
  return out;
}

std::vector<EnergyPoint> kw_convergence_diag(const GeneralMarketCoeffs& coeffs, const IntegrandFn& nu,
                                             const TimeGrid& grid, const RandomStream& stream,
                                             Index paths, const std::vector<double>& n_list) {
  const GeneralMarketPaths limit = simulate_general_market(coeffs, kInf, grid, stream, paths);
  const std::vector<PathMatrix> nu_paths = evaluate_integrand(nu, limit);
  for (Index r = 0; r < paths; ++r) {
    for (int k = 0; k < grid.steps(); ++k) {
      double dot = 0.0;
      for (std::size_t j = 0; j < nu_paths.size(); ++j) dot += nu_paths[j](r, k) * limit.sigma[j](r, k);
      if (!(std::abs(dot) < 1e-10)) {
        throw std::invalid_argument("integrand is not orthogonal to the limit market's sigma");
      }
    }
  }
  std::vector<EnergyPoint> out;
  for (double n : n_list) {
    // Shared stream: the driver paths are identical for every n.
    const GeneralMarketPaths market = simulate_general_market(coeffs, n, grid, stream, paths);
    const ProjectionResult p = kw_decompose(nu_paths, market.sigma, market.dB, grid.dt());
    out.push_back({n, p.energy, nondegeneracy_check(market.sigma)});
  }
  return out;
}

double nondegeneracy_check(const std::vector<PathMatrix>& sigma) {
  if (sigma.empty()) throw std::invalid_argument("nondegeneracy_check: empty sigma");
  const Index rows = sigma[0].rows(), cols = sigma[0].cols();
  Index zeros = 0;
  for (Index r = 0; r < rows; ++r) {
    for (Index k = 0; k < cols; ++k) {
      bool zero = true;
      for (const auto& s : sigma) zero = zero && s(r, k) == 0.0;
      zeros += zero;
    }
  }
  return static_cast<double>(zeros) / static_cast<double>(rows * cols);
}

KwFamily kw_family(const std::string& name) {
  KwFamily f;
  f.coeffs.dimension = 2;
  f.coeffs.name = name;
  f.coeffs.lambda = [](double, double, std::span<const double>) { return 0.0; };
  if (name == "nondegenerate") {
    f.coeffs.sigma = [](double n, double, std::span<const double> b, std::span<double> out) {
      out[0] = 1.0 + 0.5 * std::sin(b[0]);
      out[1] = std::isinf(n) ? 0.0 : std::cos(b[1]) / n;
    };
    f.nu = [](double, std::span<const double>, std::span<double> out) {
      out[0] = 0.0;
      out[1] = 1.0;
    };
  } else if (name == "degenerate") {
    f.coeffs.sigma = [](double n, double, std::span<const double>, std::span<double> out) {
      out[0] = std::isinf(n) ? 0.0 : 1.0 / n;
      out[1] = 0.0;
    };
    f.nu = [](double, std::span<const double>, std::span<double> out) {
      out[0] = 1.0;
      out[1] = 0.0;
    };
  } else {
    throw std::invalid_argument("unknown kw family: " + name);
  }
  return f;
}

}  // namespace ustab
