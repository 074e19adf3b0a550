#pragma once

#include "ustab/types.hpp"

#include <functional>

namespace ustab {

struct BoxMinimum {
  VectorXd argmin;
  double value = kInf;
  int evaluations = 0;
};

// Box-projected Nelder-Mead minimization of f (which may return +inf) with a
// hard evaluation budget.  Coordinates with lo == hi are held fixed.  Starts
// at the projection of start with initial steps step_fraction * (hi - lo),
// restarts from the incumbent with halved steps when the simplex collapses.
// Ties in value are broken lexicographically on the coordinates, so the
// result is a deterministic function of (f, box, start, budget).
BoxMinimum minimize_in_box(const std::function<double(const VectorXd&)>& f, const VectorXd& lo,
                           const VectorXd& hi, const VectorXd& start, int budget,
                           double step_fraction = 0.25);

}  // namespace ustab
