#pragma once

#include "ustab/market.hpp"

#include <functional>

namespace ustab {

// E[g(mean + sd N)] by Golub-Welsch Gauss-Hermite quadrature.
double gaussian_expectation(const std::function<double(double)>& g, double mean, double sd, int nodes = 64);

// E[exp(-u int_0^T V dt)] for the CIR variance, closed form.
double cir_bond_price(const HestonParams& params, double u);

}  // namespace ustab
