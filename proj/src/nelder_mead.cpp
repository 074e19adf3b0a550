#include "ustab/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <vector>

namespace ustab {

namespace {

struct Vertex {
  VectorXd x;
  double f;
};

bool lex_less(const VectorXd& a, const VectorXd& b) {
  return std::lexicographical_compare(a.data(), a.data() + a.size(), b.data(), b.data() + b.size());
}

bool better(const Vertex& a, const Vertex& b) {
  if (a.f != b.f) return a.f < b.f;
  return lex_less(a.x, b.x);
}

}  // namespace

BoxMinimum minimize_in_box(const std::function<double(const VectorXd&)>& f, const VectorXd& lo,
                           const VectorXd& hi, const VectorXd& start, int budget,
                           double step_fraction) {
  if (budget <= 0) throw std::invalid_argument("optimizer budget must be positive");
  if (lo.size() != hi.size() || lo.size() != start.size()) {
    throw std::invalid_argument("box and start dimensions differ");
  }
  for (Index i = 0; i < lo.size(); ++i) {
    if (!std::isfinite(lo(i)) || !std::isfinite(hi(i)) || lo(i) > hi(i)) {
      throw std::invalid_argument("coefficient box must be finite with lo <= hi");
    }
  }
  const auto project = [&](VectorXd x) { return x.cwiseMax(lo).cwiseMin(hi).eval(); };

  BoxMinimum best;
  const auto eval = [&](const VectorXd& x) {
    double v = f(x);
    if (std::isnan(v)) v = kInf;
    ++best.evaluations;
    const Vertex cand{x, v};
    if (best.argmin.size() == 0 || better(cand, Vertex{best.argmin, best.value})) {
      best.argmin = x;
      best.value = v;
    }
    return v;
  };

  std::vector<Index> free;
  for (Index i = 0; i < lo.size(); ++i) {
    if (hi(i) > lo(i)) free.push_back(i);
  }
  VectorXd x0 = project(start);
  eval(x0);
  if (free.empty()) return best;

  const std::size_t n = free.size();
  double scale = step_fraction;
  while (best.evaluations < budget) {
    std::vector<Vertex> simplex;
    simplex.push_back({best.argmin, best.value});
    for (std::size_t j = 0; j < n && best.evaluations < budget; ++j) {
      VectorXd x = best.argmin;
      const Index i = free[j];
      const double step = scale * (hi(i) - lo(i));
      x(i) = x(i) + step <= hi(i) ? x(i) + step : x(i) - step;
      x = project(x);
      simplex.push_back({x, eval(x)});
    }
    if (simplex.size() < n + 1) break;

    while (best.evaluations < budget) {
      std::sort(simplex.begin(), simplex.end(), better);
      double diameter = 0.0;
      for (std::size_t j = 1; j <= n; ++j) {
        diameter = std::max(diameter, (simplex[j].x - simplex[0].x).cwiseAbs().maxCoeff());
      }
      const double width = (hi - lo).maxCoeff();
      if (diameter <= 1e-9 * width) break;

      VectorXd centroid = VectorXd::Zero(lo.size());
      for (std::size_t j = 0; j < n; ++j) centroid += simplex[j].x;
      centroid /= static_cast<double>(n);
      Vertex& worst = simplex[n];

      const VectorXd xr = project(centroid + (centroid - worst.x));
      const double fr = eval(xr);
      if (fr < simplex[0].f) {
        if (best.evaluations >= budget) break;
        const VectorXd xe = project(centroid + 2.0 * (centroid - worst.x));
        const double fe = eval(xe);
        worst = fe < fr ? Vertex{xe, fe} : Vertex{xr, fr};
      } else if (fr < simplex[n - 1].f) {
        worst = {xr, fr};
      } else {
        if (best.evaluations >= budget) break;
        const bool outside = fr < worst.f;
        const VectorXd xc = outside ? project(centroid + 0.5 * (xr - centroid))
                                    : project(centroid + 0.5 * (worst.x - centroid));
        const double fc = eval(xc);
        if (fc < std::min(fr, worst.f)) {
          worst = {xc, fc};
        } else {
          for (std::size_t j = 1; j <= n && best.evaluations < budget; ++j) {
            simplex[j].x = project(simplex[0].x + 0.5 * (simplex[j].x - simplex[0].x));
            simplex[j].f = eval(simplex[j].x);
          }
        }
      }
    }
    scale *= 0.5;
    if (scale < 1e-6) break;
  }
  return best;
}

}  // namespace ustab
