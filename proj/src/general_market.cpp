#include "ustab/general_market.hpp"

#include "ustab/errors.hpp"
#include "ustab/parallel.hpp"

#include <cmath>
#include <stdexcept>

namespace ustab {

GeneralMarketPaths simulate_general_market(const GeneralMarketCoeffs& coeffs, double n,
                                           const TimeGrid& grid, const RandomStream& stream,
                                           Index paths) {
  if (paths <= 0) throw ConfigError("paths", "must be positive");
  if (coeffs.dimension < 1) throw ConfigError("dimension", "must be positive");
  if (!coeffs.sigma || !coeffs.lambda) throw ConfigError("coefficients", "sigma and lambda required");
  const int d = coeffs.dimension;
  const int steps = grid.steps();
  GeneralMarketPaths out{grid, n, d, {}, {}, {}, {}, {}, {}, {}, {}};
  for (int j = 0; j < d; ++j) {
    out.B.emplace_back(paths, steps + 1);
    out.dB.emplace_back(paths, steps);
    out.sigma.emplace_back(paths, steps);
  }
  out.lambda.resize(paths, steps);
  out.S.resize(paths, steps + 1);
  out.M.resize(paths, steps + 1);
  out.dS.resize(paths, steps);
  out.dM.resize(paths, steps);

  const double dt = grid.dt();
  const double sqdt = std::sqrt(dt);
  parallel_for(static_cast<std::size_t>(paths), [&](std::size_t begin, std::size_t end) {
    std::vector<double> b(static_cast<std::size_t>(d)), sig(static_cast<std::size_t>(d)),
        db(static_cast<std::size_t>(d));
    for (std::size_t i = begin; i < end; ++i) {
      const auto r = static_cast<Index>(i);
      std::fill(b.begin(), b.end(), 0.0);
      double s = 0.0, m = 0.0;
      for (int j = 0; j < d; ++j) out.B[static_cast<std::size_t>(j)](r, 0) = 0.0;
      out.S(r, 0) = 0.0;
      out.M(r, 0) = 0.0;
      for (int k = 0; k < steps; ++k) {
        const double t = grid.time(k);
        coeffs.sigma(n, t, b, sig);
        const double lam = coeffs.lambda(n, t, b);
        double norm2 = 0.0;
        for (int j = 0; j < d; ++j) {
          const double v = sig[static_cast<std::size_t>(j)];
          if (std::isnan(v)) throw std::domain_error("sigma evaluated to NaN");
          norm2 += v * v;
        }
        if (std::isnan(lam)) throw std::domain_error("lambda evaluated to NaN");
        for (int j = 0; j < d; j += 2) {
          const auto [g1, g2] =
              stream.normal_pair(StreamTag::kGeneralDrivers, i, static_cast<std::uint32_t>(k),
                                 static_cast<std::uint32_t>(j / 2));
          db[static_cast<std::size_t>(j)] = g1 * sqdt;
          if (j + 1 < d) db[static_cast<std::size_t>(j + 1)] = g2 * sqdt;
        }
        double dm = 0.0;
        for (int j = 0; j < d; ++j) dm += sig[static_cast<std::size_t>(j)] * db[static_cast<std::size_t>(j)];
        const double ds = lam * norm2 * dt + dm;
        s += ds;
        m += dm;
        for (int j = 0; j < d; ++j) {
          const auto ju = static_cast<std::size_t>(j);
          b[ju] += db[ju];
          out.B[ju](r, k + 1) = b[ju];
          out.dB[ju](r, k) = db[ju];
          out.sigma[ju](r, k) = sig[ju];
        }
        out.lambda(r, k) = lam;
        out.S(r, k + 1) = s;
        out.M(r, k + 1) = m;
        out.dS(r, k) = ds;
        out.dM(r, k) = dm;
      }
    }
  });
  return out;
}

PathBundle to_path_bundle(const GeneralMarketPaths& market, std::uint64_t seed) {
  const Index paths = market.paths();
  const int steps = market.grid.steps();
  PathBundle bundle{market.grid, std::nullopt, 0.0, seed, {}, {}, {}, {}, {}, {}};
  bundle.B = market.B[0];
  bundle.W = market.dimension > 1 ? market.B[1] : PathMatrix::Zero(paths, steps + 1);
  bundle.S = market.S;
  bundle.dS = market.dS;
  bundle.V.resize(paths, steps + 1);
  bundle.Z.resize(paths, steps + 1);
  const double dt = market.grid.dt();
  for (Index r = 0; r < paths; ++r) {
    double log_z = 0.0;
    bundle.Z(r, 0) = 1.0;
    for (int k = 0; k < steps; ++k) {
      double norm2 = 0.0;
      for (const auto& sig : market.sigma) norm2 += sig(r, k) * sig(r, k);
      bundle.V(r, k) = norm2;
      const double lam = market.lambda(r, k);
      log_z += -lam * market.dM(r, k) - 0.5 * lam * lam * norm2 * dt;
      bundle.Z(r, k + 1) = std::exp(log_z);
    }
    bundle.V(r, steps) = bundle.V(r, steps - 1);
  }
  return bundle;
}

GeneralMarketCoeffs scaled_brownian_family() {
  GeneralMarketCoeffs c;
  c.dimension = 1;
  c.name = "scaled_brownian";
  c.sigma = [](double n, double, std::span<const double>, std::span<double> out) {
    out[0] = std::isinf(n) ? 0.0 : 1.0 / n;
  };
  c.lambda = [](double, double, std::span<const double>) { return 0.0; };
  return c;
}

}  // namespace ustab
