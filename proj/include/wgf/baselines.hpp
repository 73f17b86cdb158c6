#pragma once

#include <functional>

#include "wgf/linalg.hpp"
#include "wgf/potential.hpp"

namespace wgf {

// Terminal particle positions after n_steps of the Euler-Maruyama update
//   x <- x - grad Phi(x) dt + sqrt(2 inv_beta dt) xi.
// x0 is consumed and returned. Throws NonFinitePosition when a particle
// leaves the finite range.
Mat em_simulate(const Potential& phi, Mat x0, double inv_beta, double dt,
                std::size_t n_steps, Rng& rng);

// Gaussian kernel density estimate with Scott's bandwidth
//   H = n^(-2/(d+4)) * Cov(points).
struct Kde {
    Mat points;
    Cholesky bw;      // factor of H
    double log_norm;  // -log n - (d/2) log 2pi - logdet(H)/2
};

// Throws SingularBandwidth when the point spread is degenerate.
Kde kde_fit(Mat points);
double kde_logpdf(const Kde& k, const double* x);

// Uniform cell-centered 1-D grid on [lo, hi].
struct Grid1D {
    double lo = -5.0;
    double hi = 5.0;
    std::size_t cells = 2000;

    double dx() const { return (hi - lo) / static_cast<double>(cells); }
    double center(std::size_t j) const {
        return lo + (static_cast<double>(j) + 0.5) * dx();
    }
};

// fn at cell centers, normalized to unit mass. Throws NegativeDensity when fn
// dips below zero, InvalidArgument when all mass vanishes.
Vec grid_project(const std::function<double(double)>& fn, const Grid1D& g);
double grid_mass(const Vec& rho, const Grid1D& g);
void grid_moments(const Vec& rho, const Grid1D& g, double& mean, double& var);

// Bernoulli flux weight w / (e^w - 1), series near zero. The interface ratio
// B(w)/B(-w) = e^-w makes exp(-Phi/inv_beta) the exact discrete fixed point.
double cc_bernoulli(double w);

// Implicit-Euler Chang-Cooper steps for
//   d rho/dt = d/dx (Phi' rho + inv_beta d rho/dx)
// with zero-flux boundaries. rho holds density values at cell centers; mass
// (sum * dx) is conserved to roundoff and nonnegativity is preserved (the
// system matrix is an M-matrix, and back substitution never cancels).
void chang_cooper_evolve(const Potential& phi, double inv_beta, const Grid1D& g,
                         Vec& rho, double dt, std::size_t steps);

// Pointwise multiply by the observation likelihood N(y; x, sigma^2) and
// renormalize to unit mass. Works in logs, so far-tail underflow cannot zero
// the posterior; a vanishing posterior (observation far outside the prior's
// support) throws InvalidArgument.
void bayes_update_grid(Vec& rho, const Grid1D& g, double y, double sigma);

}  // namespace wgf
