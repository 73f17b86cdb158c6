#pragma once

#include <memory>
#include <variant>

#include "wgf/dataset.hpp"
#include "wgf/mat.hpp"
#include "wgf/rng.hpp"

namespace wgf {

// Confining potentials Phi driving the flow toward exp(-beta*Phi)/Z.

// Phi(x) = 0.5 (x-b)^T A (x-b), A symmetric positive definite.
struct QuadraticPotential {
    Mat A;
    Vec b;
};

// Phi(x) = -beta^-1 log q(x) for q a uniform-weight mixture of unit-covariance
// Gaussians, so the stationary density is q itself with Z = 1.
struct GaussianMixturePotential {
    std::vector<Vec> means;
    double inv_beta = 1.0;
};

// Bayesian logistic regression posterior over x = [w, lambda], lambda = log of
// the prior precision: Phi(x) = -beta^-1 [log p0(x) + (M/m) sum_batch log p(s|x)].
// The dataset already carries the constant bias column, so w spans all
// n_features columns (bias weight included) and the model dimension is
// n_features + 1. With rng == nullptr the full dataset is used (deterministic).
struct LogisticPosteriorPotential {
    std::shared_ptr<const LabeledDataset> data;
    std::size_t minibatch = 0;  // 0 or >= n(): full batch
    double inv_beta = 1.0;
};

// Phi(x) = sin(2 pi x)/pi + x^2/4, the classic bistable 1-D benchmark.
struct Sinusoid1DPotential {};

// Phi == 0 (free diffusion); also the pretraining target.
struct ZeroPotential {};

using Potential = std::variant<QuadraticPotential, GaussianMixturePotential,
                               LogisticPosteriorPotential, Sinusoid1DPotential,
                               ZeroPotential>;

// Validates the SPD requirement (throws NotPositiveDefinite).
Potential make_quadratic(Mat a, Vec b);

// M means drawn uniformly from [-side/2, side/2]^dim.
GaussianMixturePotential random_mixture(std::size_t dim, std::size_t components,
                                        double side, double inv_beta, Rng& rng);

// Model dimension the potential expects (0 = any, for ZeroPotential).
std::size_t potential_dim(const Potential& p);

double potential_value(const Potential& p, const double* x, std::size_t dim, Rng* rng);

// value + gradient in one evaluation; the logistic minibatch is drawn once and
// shared by both, which keeps the pair consistent inside a loss evaluation.
double potential_value_grad(const Potential& p, const double* x, std::size_t dim,
                            double* grad, Rng* rng);

// Log of the mixture density q itself (Z = 1; used by stationary targets).
double mixture_logdensity(const GaussianMixturePotential& p, const double* x,
                          std::size_t dim);

// Deterministic estimator with an explicit index set (unbiasedness tests).
double logistic_value_with_batch(const LogisticPosteriorPotential& p, const double* x,
                                 std::size_t dim, const std::vector<std::size_t>& batch);

}  // namespace wgf
