#pragma once

#include "wgf/mat.hpp"
#include "wgf/potential.hpp"
#include "wgf/rng.hpp"

namespace wgf {

// Monte Carlo mean with its standard error.
struct McEstimate {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n = 0;
};

McEstimate mc_mean(const Vec& xs);

// Differential-entropy increase of a pushforward through a smooth invertible
// map, estimated from per-sample log|det Jacobian| values alone. No density
// of the base measure enters; the estimate is invariant to shifting it.
McEstimate entropy_gain_estimate(const Vec& logdets);

// Free energy mean Phi + inv_beta * mean log rho from samples carrying their
// exact log density. The total's standard error accounts for the per-sample
// correlation between the two terms.
struct FpEnergy {
    McEstimate potential;
    McEstimate neg_entropy;  // mean log rho
    double total = 0.0;
    double std_error = 0.0;
};

FpEnergy fp_energy_estimate(const Potential& phi, double inv_beta, const Mat& x,
                            const Vec& logdensity, Rng* rng = nullptr);

// Normalized stationary log density log(exp(-Phi/inv_beta)/Z), available when
// Z has a closed form: quadratic and Gaussian-mixture potentials.
bool stationary_has_closed_form(const Potential& phi);
double stationary_logdensity(const Potential& phi, double inv_beta, const double* x,
                             std::size_t dim);

}  // namespace wgf
