#pragma once

#include "wgf/linalg.hpp"
#include "wgf/mat.hpp"
#include "wgf/potential.hpp"
#include "wgf/rng.hpp"

namespace wgf {

// Multivariate normal with a cached Cholesky factor; the constructor validates
// symmetry and positive definiteness.
class Gaussian {
  public:
    Gaussian(Vec mean, Mat cov);

    std::size_t dim() const { return mean_.size(); }
    const Vec& mean() const { return mean_; }
    const Mat& cov() const { return cov_; }
    double logdet_cov() const { return chol_.logdet; }

    void sample(Rng& rng, double* out) const;
    Mat sample_n(Rng& rng, std::size_t n) const;
    double logpdf(const double* x) const;
    // D/2 (1 + log 2 pi) + logdet/2.
    double entropy() const;

  private:
    Vec mean_;
    Mat cov_;
    Cholesky chol_;
};

// KL(p0 || p1) in closed form.
double gaussian_kl(const Gaussian& p0, const Gaussian& p1);

// Draws from the uniform-weight unit-covariance mixture.
Mat mixture_sample_n(const GaussianMixturePotential& p, Rng& rng, std::size_t n);

// Stationary law of the overdamped dynamics in a quadratic potential:
// N(b, inv_beta * A^-1).
Gaussian stationary_gaussian(const QuadraticPotential& q, double inv_beta);

// Ornstein-Uhlenbeck marginal at time t from a Gaussian start:
//   mu_t    = b + e^{-At}(mu_0 - b)
//   Sigma_t = e^{-At} Sigma_0 e^{-At} + inv_beta A^-1 (I - e^{-2At}).
Gaussian ou_gaussian(const QuadraticPotential& q, const Gaussian& init,
                     double inv_beta, double t);

}  // namespace wgf
