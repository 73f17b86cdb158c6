#include "wgf/baselines.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "wgf/errors.hpp"
#include "wgf/kernels.hpp"

namespace wgf {

Mat em_simulate(const Potential& phi, Mat x0, double inv_beta, double dt,
                std::size_t n_steps, Rng& rng) {
    if (!(dt > 0.0)) throw InvalidArgument("em_simulate: dt must be positive");
    if (inv_beta < 0.0) throw InvalidArgument("em_simulate: inv_beta must be nonnegative");
    if (x0.rows == 0 || x0.cols == 0) throw InvalidArgument("em_simulate: empty state");
    const std::size_t d = x0.cols;
    const double noise = std::sqrt(2.0 * inv_beta * dt);
    Vec grad(d);
    for (std::size_t step = 0; step < n_steps; ++step) {
        for (std::size_t i = 0; i < x0.rows; ++i) {
            double* x = x0.row(i);
            potential_value_grad(phi, x, d, grad.data(), &rng);
            bool finite = true;
            for (std::size_t j = 0; j < d; ++j) {
                x[j] += -dt * grad[j] + noise * rng.normal();
                finite = finite && std::isfinite(x[j]);
            }
            if (!finite)
                throw NonFinitePosition("em_simulate: particle " + std::to_string(i) +
                                        " diverged at step " + std::to_string(step));
        }
    }
    return x0;
}

Kde kde_fit(Mat points) {
    const std::size_t n = points.rows, d = points.cols;
    if (n < 2 || d == 0)
        throw SingularBandwidth("kde_fit: need at least two points");

    Vec mu(d, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) mu[j] += points(i, j);
    for (auto& v : mu) v /= static_cast<double>(n);

    Mat cov(d, d);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < d; ++j) {
            const double vj = points(i, j) - mu[j];
            for (std::size_t k = j; k < d; ++k)
                cov(j, k) += vj * (points(i, k) - mu[k]);
        }
    const double scott = std::pow(static_cast<double>(n),
                                  -2.0 / (static_cast<double>(d) + 4.0));
    for (std::size_t j = 0; j < d; ++j)
        for (std::size_t k = j; k < d; ++k) {
            cov(j, k) *= scott / static_cast<double>(n);
            cov(k, j) = cov(j, k);
        }

    Kde kde;
    kde.points = std::move(points);
    try {
        kde.bw = chol(cov);
    } catch (const NotPositiveDefinite&) {
        throw SingularBandwidth("kde_fit: bandwidth matrix is singular");
    }
    kde.log_norm = -std::log(static_cast<double>(n)) -
                   0.5 * static_cast<double>(d) * std::log(2.0 * 3.14159265358979323846) -
                   0.5 * kde.bw.logdet;
    return kde;
}

double kde_logpdf(const Kde& k, const double* x) {
    const std::size_t n = k.points.rows, d = k.points.cols;
    Vec q(n), v(d);
    double best = -1e300;
    for (std::size_t i = 0; i < n; ++i) {
        const double* p = k.points.row(i);
        for (std::size_t j = 0; j < d; ++j) v[j] = x[j] - p[j];
        const Vec hv = k.bw.solve_copy(v);
        q[i] = -0.5 * kernels::dot(v.data(), hv.data(), d);
        best = std::max(best, q[i]);
    }
    double acc = 0.0;
    for (const double qi : q) acc += std::exp(qi - best);
    return best + std::log(acc) + k.log_norm;
}

Vec grid_project(const std::function<double(double)>& fn, const Grid1D& g) {
    if (g.cells < 3 || !(g.hi > g.lo)) throw InvalidArgument("grid_project: bad grid");
    Vec rho(g.cells);
    for (std::size_t j = 0; j < g.cells; ++j) {
        rho[j] = fn(g.center(j));
        if (rho[j] < 0.0)
            throw NegativeDensity("grid_project: negative value at x = " +
                                  std::to_string(g.center(j)));
    }
    const double mass = grid_mass(rho, g);
    if (!(mass > 0.0)) throw InvalidArgument("grid_project: zero mass");
    for (auto& v : rho) v /= mass;
    return rho;
}

double grid_mass(const Vec& rho, const Grid1D& g) {
    if (rho.size() != g.cells) throw DimensionMismatch("grid_mass: size differs");
    return kernels::sum(rho.data(), rho.size()) * g.dx();
}

void grid_moments(const Vec& rho, const Grid1D& g, double& mean, double& var) {
    const double mass = grid_mass(rho, g);
    if (!(mass > 0.0)) throw InvalidArgument("grid_moments: zero mass");
    double m1 = 0.0, m2 = 0.0;
    for (std::size_t j = 0; j < g.cells; ++j) {
        const double x = g.center(j);
        m1 += rho[j] * x;
        m2 += rho[j] * x * x;
    }
    m1 *= g.dx() / mass;
    m2 *= g.dx() / mass;
    mean = m1;
    var = m2 - m1 * m1;
}

double cc_bernoulli(double w) {
    if (std::abs(w) < 1e-8) return 1.0 - 0.5 * w + w * w / 12.0;
    return w / std::expm1(w);
}

void chang_cooper_evolve(const Potential& phi, double inv_beta, const Grid1D& g,
                         Vec& rho, double dt, std::size_t steps) {
    const std::size_t m = g.cells;
    if (m < 3 || !(g.hi > g.lo)) throw InvalidArgument("chang_cooper: bad grid");
    if (rho.size() != m) throw DimensionMismatch("chang_cooper: rho size differs");
    if (!(dt > 0.0)) throw InvalidArgument("chang_cooper: dt must be positive");
    if (!(inv_beta > 0.0)) throw InvalidArgument("chang_cooper: inv_beta must be positive");
    for (const double v : rho)
        if (v < 0.0) throw NegativeDensity("chang_cooper: negative initial density");

    Vec pot(m);
    for (std::size_t j = 0; j < m; ++j) {
        const double x = g.center(j);
        pot[j] = potential_value(phi, &x, 1, nullptr);
    }

    // Interface weights and the constant implicit-Euler tridiagonal system
    //   -c Bp[j-1] rho_{j-1} + (1 + c (Bm[j-1] + Bp[j])) rho_j - c Bm[j] rho_{j+1}
    // with zero-flux ends; columns sum to one, so mass is conserved exactly.
    const double c = dt * inv_beta / (g.dx() * g.dx());
    Vec bp(m - 1), bm(m - 1);
    for (std::size_t j = 0; j + 1 < m; ++j) {
        const double w = (pot[j + 1] - pot[j]) / inv_beta;
        bp[j] = cc_bernoulli(w);
        bm[j] = cc_bernoulli(-w);
    }
    Vec lower(m, 0.0), diag(m), upper(m, 0.0);
    for (std::size_t j = 0; j < m; ++j) {
        double dj = 1.0;
        if (j > 0) {
            lower[j] = -c * bp[j - 1];
            dj += c * bm[j - 1];
        }
        if (j + 1 < m) {
            upper[j] = -c * bm[j];
            dj += c * bp[j];
        }
        diag[j] = dj;
    }

    // Thomas factorization once; only the substitution runs per step.
    Vec cp(m, 0.0), denom(m);
    denom[0] = diag[0];
    cp[0] = upper[0] / denom[0];
    for (std::size_t j = 1; j < m; ++j) {
        denom[j] = diag[j] - lower[j] * cp[j - 1];
        if (j + 1 < m) cp[j] = upper[j] / denom[j];
    }

    Vec dd(m);
    for (std::size_t s = 0; s < steps; ++s) {
        dd[0] = rho[0] / denom[0];
        for (std::size_t j = 1; j < m; ++j)
            dd[j] = (rho[j] - lower[j] * dd[j - 1]) / denom[j];
        rho[m - 1] = dd[m - 1];
        for (std::size_t j = m - 1; j-- > 0;) rho[j] = dd[j] - cp[j] * rho[j + 1];
    }
}

void bayes_update_grid(Vec& rho, const Grid1D& g, double y, double sigma) {
    if (rho.size() != g.cells) throw DimensionMismatch("bayes_update_grid: size differs");
    if (!(sigma > 0.0)) throw InvalidArgument("bayes_update_grid: sigma must be positive");
    Vec logpost(g.cells, -std::numeric_limits<double>::infinity());
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < g.cells; ++j) {
        if (!(rho[j] >= 0.0))
            throw NegativeDensity("bayes_update_grid: rho[" + std::to_string(j) + "] = " +
                                  std::to_string(rho[j]));
        if (rho[j] == 0.0) continue;
        const double r = (g.center(j) - y) / sigma;
        logpost[j] = std::log(rho[j]) - 0.5 * r * r;
        top = std::max(top, logpost[j]);
    }
    if (!std::isfinite(top))
        throw InvalidArgument("bayes_update_grid: posterior mass vanished");
    double mass = 0.0;
    for (std::size_t j = 0; j < g.cells; ++j) {
        rho[j] = std::exp(logpost[j] - top);
        mass += rho[j] * g.dx();
    }
    for (double& v : rho) v /= mass;
}

}  // namespace wgf
