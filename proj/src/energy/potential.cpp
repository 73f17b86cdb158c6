#include "wgf/potential.hpp"

#include <algorithm>
#include <cmath>

#include "wgf/activations.hpp"
#include "wgf/errors.hpp"
#include "wgf/kernels.hpp"
#include "wgf/linalg.hpp"

namespace wgf {

namespace {

constexpr double kLog2Pi = 1.8378770664093454835606594728112;
constexpr double kGammaRate = 0.01;  // prior precision ~ Gamma(1, rate)

double quad_value_grad(const QuadraticPotential& p, const double* x, std::size_t dim,
                       double* grad) {
    if (p.b.size() != dim) throw DimensionMismatch("quadratic potential: dim differs");
    Vec d(dim);
    for (std::size_t i = 0; i < dim; ++i) d[i] = x[i] - p.b[i];
    Vec ad(dim);
    kernels::gemv(dim, dim, p.A.data(), d.data(), ad.data(), false);
    if (grad) std::copy(ad.begin(), ad.end(), grad);
    return 0.5 * kernels::dot(d.data(), ad.data(), dim);
}

double mixture_value_grad(const GaussianMixturePotential& p, const double* x,
                          std::size_t dim, double* grad) {
    // log q and its gradient via softmax over component responsibilities.
    const std::size_t m = p.means.size();
    Vec logits(m);
    double best = -1e300;
    for (std::size_t c = 0; c < m; ++c) {
        double sq = 0.0;
        for (std::size_t i = 0; i < dim; ++i) {
            const double d = x[i] - p.means[c][i];
            sq += d * d;
        }
        logits[c] = -0.5 * sq;
        best = std::max(best, logits[c]);
    }
    double denom = 0.0;
    for (std::size_t c = 0; c < m; ++c) denom += std::exp(logits[c] - best);
    const double logq = best + std::log(denom) - std::log(static_cast<double>(m)) -
                        0.5 * static_cast<double>(dim) * kLog2Pi;
    if (grad) {
        std::fill(grad, grad + dim, 0.0);
        for (std::size_t c = 0; c < m; ++c) {
            const double resp = std::exp(logits[c] - best) / denom;
            for (std::size_t i = 0; i < dim; ++i)
                grad[i] += resp * (p.means[c][i] - x[i]);
        }
        // Phi = -inv_beta * log q
        for (std::size_t i = 0; i < dim; ++i) grad[i] *= -p.inv_beta;
    }
    return -p.inv_beta * logq;
}

// log p0(x) = log N(w | 0, e^-lambda I) + log Gamma(e^lambda | 1, rate) + lambda.
double logistic_prior(const double* x, std::size_t dim, double* grad) {
    const std::size_t fw = dim - 1;  // weight block (features + bias)
    const double lambda = x[fw];
    const double prec = std::exp(lambda);
    const double wsq = kernels::sqnorm(x, fw);
    const double val = 0.5 * static_cast<double>(fw) * (lambda - kLog2Pi) -
                       0.5 * prec * wsq + std::log(kGammaRate) - kGammaRate * prec +
                       lambda;
    if (grad) {
        for (std::size_t i = 0; i < fw; ++i) grad[i] += -prec * x[i];
        grad[fw] += 0.5 * static_cast<double>(fw) - 0.5 * prec * wsq -
                    kGammaRate * prec + 1.0;
    }
    return val;
}

// Adds scale * d log p(s_j | x) for one observation to grad; returns the term.
// The bias weight needs no separate handling: the dataset's last feature column
// is the constant 1 appended at parse time.
double logistic_ll_term(const LabeledDataset& ds, std::size_t j, const double* x,
                        double scale, double* grad) {
    const std::size_t f = ds.n_features();
    const double y = static_cast<double>(ds.labels[j]);
    const double margin = kernels::dot(ds.features.row(j), x, f);
    const double z = y * margin;
    const double ll = -softplus(-z);
    if (grad) {
        const double coef = scale * y * sigmoid(-z);
        kernels::axpy(coef, ds.features.row(j), grad, f);
    }
    return ll;
}

double logistic_value_grad(const LogisticPosteriorPotential& p, const double* x,
                           std::size_t dim, double* grad, Rng* rng) {
    if (!p.data) throw InvalidArgument("logistic potential: no dataset");
    const LabeledDataset& ds = *p.data;
    if (dim != ds.n_features() + 1)
        throw DimensionMismatch("logistic potential: expected dim n_features+1");
    if (grad) std::fill(grad, grad + dim, 0.0);

    double lp = logistic_prior(x, dim, grad);
    const std::size_t n = ds.n();
    const bool full = rng == nullptr || p.minibatch == 0 || p.minibatch >= n;
    if (full) {
        for (std::size_t j = 0; j < n; ++j)
            lp += logistic_ll_term(ds, j, x, 1.0, grad);
    } else {
        // m distinct indices by partial Fisher-Yates; (n/m) rescales to keep
        // the estimator unbiased.
        const std::size_t m = p.minibatch;
        const double scale = static_cast<double>(n) / static_cast<double>(m);
        std::vector<std::size_t> pool(n);
        for (std::size_t i = 0; i < n; ++i) pool[i] = i;
        double ll = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
            const std::size_t pick = i + rng->uniform_index(n - i);
            std::swap(pool[i], pool[pick]);
            ll += logistic_ll_term(ds, pool[i], x, scale, grad);
        }
        lp += scale * ll;
    }

    // Phi = -inv_beta * [...]
    if (grad)
        for (std::size_t i = 0; i < dim; ++i) grad[i] *= -p.inv_beta;
    return -p.inv_beta * lp;
}

double sinusoid_value_grad(const double* x, std::size_t dim, double* grad) {
    if (dim != 1) throw DimensionMismatch("sinusoid potential is 1-D");
    constexpr double kPi = 3.1415926535897932384626433832795;
    const double v = std::sin(2.0 * kPi * x[0]) / kPi + 0.25 * x[0] * x[0];
    if (grad) grad[0] = 2.0 * std::cos(2.0 * kPi * x[0]) + 0.5 * x[0];
    return v;
}

}  // namespace

Potential make_quadratic(Mat a, Vec b) {
    if (a.rows != a.cols || a.rows != b.size())
        throw DimensionMismatch("make_quadratic: shapes differ");
    if (max_asymmetry(a) > 1e-10) throw NotSymmetric("make_quadratic: A not symmetric");
    chol(a);  // throws NotPositiveDefinite if A is not SPD
    QuadraticPotential q;
    q.A = std::move(a);
    q.b = std::move(b);
    return q;
}

GaussianMixturePotential random_mixture(std::size_t dim, std::size_t components,
                                        double side, double inv_beta, Rng& rng) {
    GaussianMixturePotential p;
    p.inv_beta = inv_beta;
    p.means.resize(components);
    for (auto& mu : p.means) {
        mu.resize(dim);
        for (auto& v : mu) v = (rng.uniform() - 0.5) * side;
    }
    return p;
}

std::size_t potential_dim(const Potential& p) {
    return std::visit(
        [](const auto& alt) -> std::size_t {
            using T = std::decay_t<decltype(alt)>;
            if constexpr (std::is_same_v<T, QuadraticPotential>) return alt.b.size();
            if constexpr (std::is_same_v<T, GaussianMixturePotential>)
                return alt.means.empty() ? 0 : alt.means.front().size();
            if constexpr (std::is_same_v<T, LogisticPosteriorPotential>)
                return alt.data ? alt.data->n_features() + 1 : 0;
            if constexpr (std::is_same_v<T, Sinusoid1DPotential>) return 1;
            return 0;
        },
        p);
}

double potential_value_grad(const Potential& p, const double* x, std::size_t dim,
                            double* grad, Rng* rng) {
    return std::visit(
        [&](const auto& alt) -> double {
            using T = std::decay_t<decltype(alt)>;
            if constexpr (std::is_same_v<T, QuadraticPotential>)
                return quad_value_grad(alt, x, dim, grad);
            else if constexpr (std::is_same_v<T, GaussianMixturePotential>)
                return mixture_value_grad(alt, x, dim, grad);
            else if constexpr (std::is_same_v<T, LogisticPosteriorPotential>)
                return logistic_value_grad(alt, x, dim, grad, rng);
            else if constexpr (std::is_same_v<T, Sinusoid1DPotential>)
                return sinusoid_value_grad(x, dim, grad);
            else {
                if (grad) std::fill(grad, grad + dim, 0.0);
                return 0.0;
            }
        },
        p);
}

double potential_value(const Potential& p, const double* x, std::size_t dim, Rng* rng) {
    return potential_value_grad(p, x, dim, nullptr, rng);
}

double mixture_logdensity(const GaussianMixturePotential& p, const double* x,
                          std::size_t dim) {
    return -mixture_value_grad(p, x, dim, nullptr) / p.inv_beta;
}

double logistic_value_with_batch(const LogisticPosteriorPotential& p, const double* x,
                                 std::size_t dim, const std::vector<std::size_t>& batch) {
    const LabeledDataset& ds = *p.data;
    double lp = logistic_prior(x, dim, nullptr);
    const double scale =
        static_cast<double>(ds.n()) / static_cast<double>(batch.size());
    for (const auto j : batch) lp += scale * logistic_ll_term(ds, j, x, 1.0, nullptr);
    return -p.inv_beta * lp;
}

}  // namespace wgf
