#include "wgf/energy.hpp"

#include <cmath>

#include "wgf/errors.hpp"
#include "wgf/linalg.hpp"

namespace wgf {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;
}

McEstimate mc_mean(const Vec& xs) {
    if (xs.empty()) throw InvalidArgument("mc_mean: empty sample");
    const std::size_t n = xs.size();
    double mean = 0.0;
    for (double v : xs) mean += v;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double v : xs) ss += (v - mean) * (v - mean);
    McEstimate est;
    est.value = mean;
    est.n = n;
    est.std_error =
        n > 1 ? std::sqrt(ss / static_cast<double>(n - 1) / static_cast<double>(n)) : 0.0;
    return est;
}

McEstimate entropy_gain_estimate(const Vec& logdets) { return mc_mean(logdets); }

FpEnergy fp_energy_estimate(const Potential& phi, double inv_beta, const Mat& x,
                            const Vec& logdensity, Rng* rng) {
    if (x.rows == 0) throw InvalidArgument("fp_energy: empty sample");
    if (logdensity.size() != x.rows)
        throw DimensionMismatch("fp_energy: log density count != sample count");

    Vec phis(x.rows), combined(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        phis[i] = potential_value(phi, x.row(i), x.cols, rng);
        combined[i] = phis[i] + inv_beta * logdensity[i];
    }
    FpEnergy out;
    out.potential = mc_mean(phis);
    out.neg_entropy = mc_mean(logdensity);
    const McEstimate tot = mc_mean(combined);
    out.total = tot.value;
    out.std_error = tot.std_error;
    return out;
}

bool stationary_has_closed_form(const Potential& phi) {
    return std::holds_alternative<QuadraticPotential>(phi) ||
           std::holds_alternative<GaussianMixturePotential>(phi);
}

double stationary_logdensity(const Potential& phi, double inv_beta, const double* x,
                             std::size_t dim) {
    if (!(inv_beta > 0.0))
        throw InvalidArgument("stationary_logdensity: inv_beta must be positive");
    if (const auto* q = std::get_if<QuadraticPotential>(&phi)) {
        if (q->b.size() != dim)
            throw DimensionMismatch("stationary_logdensity: dimension mismatch");
        // N(b, inv_beta A^-1): the quadratic form is Phi/inv_beta.
        const double quad = potential_value(phi, x, dim, nullptr) / inv_beta;
        const double logdet_cov =
            static_cast<double>(dim) * std::log(inv_beta) - chol_logdet(q->A);
        return -quad - 0.5 * (static_cast<double>(dim) * kLog2Pi + logdet_cov);
    }
    if (const auto* m = std::get_if<GaussianMixturePotential>(&phi)) {
        if (m->inv_beta != inv_beta)
            throw InvalidArgument(
                "stationary_logdensity: mixture potential built for a different inv_beta");
        return mixture_logdensity(*m, x, dim);
    }
    throw InvalidArgument("stationary_logdensity: no closed form for this potential");
}

}  // namespace wgf
