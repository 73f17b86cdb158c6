#pragma once

#include <cstddef>

#include "wgf/errors.hpp"

namespace wgf {

// Numerically stable softplus ladder. All four values derive from the sigmoid
// s = 1/(1+e^-u):
//   softplus(u) = max(u,0) + log1p(e^-|u|)
//   softplus'   = s
//   softplus''  = s(1-s)
// No overflow for any finite u; softplus(u) ~ u for large u, ~ e^u for small.
double softplus(double u);
double sigmoid(double u);

// order 0, 1, or 2.
double softplus_d(double u, int order);

struct SoftplusLadder {
    double value;   // softplus(u)
    double d1;      // s
    double d2;      // s(1-s)
    double d3;      // s(1-s)(1-2s)
};
SoftplusLadder softplus_ladder(double u);

// Elementwise over arrays (training hot path fills whole batch layers).
void softplus_ladder_fill(const double* u, std::size_t n, double* value, double* d1,
                          double* d2, double* d3);

}  // namespace wgf
