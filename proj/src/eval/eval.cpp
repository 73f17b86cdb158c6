#include "wgf/eval.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <memory>
#include <sstream>
#include <utility>

#include "wgf/energy.hpp"
#include "wgf/errors.hpp"

namespace wgf {

namespace {

std::string format_point(const double* x, std::size_t dim) {
    std::ostringstream os;
    os << "(";
    const std::size_t shown = std::min<std::size_t>(dim, 4);
    for (std::size_t i = 0; i < shown; ++i) {
        if (i) os << ", ";
        os << x[i];
    }
    if (shown < dim) os << ", ...";
    os << ")";
    return os.str();
}

[[noreturn]] void throw_log_ratio(const MeasureView& p, const MeasureView& q,
                                  const double* x, std::size_t dim) {
    throw NonFiniteLogRatio("symkl_mc: non-finite log ratio between " + p.descriptor +
                            " and " + q.descriptor + " at sample " +
                            format_point(x, dim));
}

// Draws n rows from `from` and fills `own` with log density of `from` at each
// row, preferring the paired sampler when the view provides one.
Mat draw_with_own(const MeasureView& from, std::size_t n, Rng& rng, Vec& own) {
    if (from.sample_logdensity) {
        FlowSample fs = from.sample_logdensity(rng, n);
        own = std::move(fs.logdensity);
        return std::move(fs.x);
    }
    Mat x = from.sampler(rng, n);
    own.resize(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) own[i] = from.logdensity(x.row(i));
    return x;
}

// Directed per-sample log ratios log from - log other over draws from `from`.
Vec directed_ratios(const MeasureView& from, const MeasureView& other,
                    std::size_t n, Rng& rng) {
    Vec own;
    const Mat x = draw_with_own(from, n, rng, own);
    Vec r(x.rows);
    for (std::size_t i = 0; i < x.rows; ++i) {
        r[i] = own[i] - other.logdensity(x.row(i));
        if (!std::isfinite(r[i])) throw_log_ratio(from, other, x.row(i), x.cols);
    }
    return r;
}

double pooled_percentile(Vec pooled, double frac) {
    for (double& v : pooled) v = std::clamp(v, -1e3, 1e3);
    const auto k = static_cast<std::size_t>(frac * static_cast<double>(pooled.size() - 1));
    std::nth_element(pooled.begin(), pooled.begin() + static_cast<std::ptrdiff_t>(k),
                     pooled.end());
    return pooled[k];
}

void require_view(const MeasureView& v, const char* side) {
    if (!v.logdensity)
        throw InvalidArgument(std::string("symkl_mc: ") + side + " view has no logdensity");
    if (!v.sampler && !v.sample_logdensity)
        throw InvalidArgument(std::string("symkl_mc: ") + side + " view has no sampler");
}

}  // namespace

SymklResult symkl_mc(const MeasureView& p, const MeasureView& q,
                     std::size_t n_samples, Rng& rng) {
    if (n_samples < 100)
        throw InvalidArgument("symkl_mc: need at least 100 samples, got " +
                              std::to_string(n_samples));
    require_view(p, "first");
    require_view(q, "second");

    const Vec rp = directed_ratios(p, q, n_samples, rng);
    const Vec rq = directed_ratios(q, p, n_samples, rng);
    const McEstimate ep = mc_mean(rp);
    const McEstimate eq = mc_mean(rq);

    Vec pooled(rp.size() + rq.size());
    std::copy(rp.begin(), rp.end(), pooled.begin());
    std::copy(rq.begin(), rq.end(), pooled.begin() + static_cast<std::ptrdiff_t>(rp.size()));

    SymklResult out;
    out.value = ep.value + eq.value;
    out.std_error = std::hypot(ep.std_error, eq.std_error);
    out.n_samples = n_samples;
    out.ratio_p01 = pooled_percentile(pooled, 0.01);
    out.ratio_p99 = pooled_percentile(std::move(pooled), 0.99);
    return out;
}

MeasureView gaussian_view(Gaussian g, std::string descriptor) {
    auto shared = std::make_shared<const Gaussian>(std::move(g));
    MeasureView v;
    v.sampler = [shared](Rng& rng, std::size_t n) { return shared->sample_n(rng, n); };
    v.logdensity = [shared](const double* x) { return shared->logpdf(x); };
    v.descriptor = std::move(descriptor);
    return v;
}

MeasureView chain_view(const JkoChain& chain, SamplerFn init_sampler,
                       LogDensityFn init_logdensity, std::string descriptor) {
    if (!init_sampler || !init_logdensity)
        throw InvalidArgument("chain_view: initial sampler and logdensity are required");
    MeasureView v;
    v.sampler = [&chain, init_sampler](Rng& rng, std::size_t n) {
        Mat x = init_sampler(rng, n);
        push_through(chain, chain.steps.size(), x);
        return x;
    };
    v.logdensity = [&chain, init_logdensity](const double* y) {
        return chain_logdensity(chain, init_logdensity, y);
    };
    v.sample_logdensity = [&chain, init_sampler, init_logdensity](Rng& rng, std::size_t n) {
        return sample_with_density(chain, init_sampler, init_logdensity, rng, n);
    };
    v.descriptor = std::move(descriptor);
    return v;
}

MeasureView kde_view(Kde kde, std::string descriptor) {
    auto shared = std::make_shared<const Kde>(std::move(kde));
    MeasureView v;
    v.sampler = [shared](Rng& rng, std::size_t n) {
        const std::size_t d = shared->points.cols;
        Mat out(n, d);
        Vec z(d);
        for (std::size_t i = 0; i < n; ++i) {
            const double* base = shared->points.row(rng.uniform_index(shared->points.rows));
            rng.fill_normal(z.data(), d);
            double* xi = out.row(i);
            // x = base + L z with L the stored factor of the bandwidth.
            for (std::size_t r = 0; r < d; ++r) {
                double acc = base[r];
                for (std::size_t c = 0; c <= r; ++c) acc += shared->bw.L(r, c) * z[c];
                xi[r] = acc;
            }
        }
        return out;
    };
    v.logdensity = [shared](const double* x) { return kde_logpdf(*shared, x); };
    v.descriptor = std::move(descriptor);
    return v;
}

MeasureView grid_view(const Grid1D& grid, Vec rho, std::string descriptor) {
    if (rho.size() != grid.cells)
        throw DimensionMismatch("grid_view: density has " + std::to_string(rho.size()) +
                                " cells, grid has " + std::to_string(grid.cells));
    for (std::size_t j = 0; j < rho.size(); ++j) {
        if (!(rho[j] >= 0.0))
            throw NegativeDensity("grid_view: rho[" + std::to_string(j) + "] = " +
                                  std::to_string(rho[j]));
    }
    const double mass = grid_mass(rho, grid);
    if (!(mass > 0.0)) throw NegativeDensity("grid_view: zero total mass");

    struct Table {
        Grid1D grid;
        Vec logrho;  // of the normalized density
        Vec cdf;     // cumulative cell probabilities, back element 1
    };
    auto t = std::make_shared<Table>();
    t->grid = grid;
    t->logrho.resize(grid.cells);
    t->cdf.resize(grid.cells);
    double run = 0.0;
    for (std::size_t j = 0; j < grid.cells; ++j) {
        const double pj = rho[j] / mass;
        t->logrho[j] = std::log(pj);  // -inf on empty cells is intended
        run += pj * grid.dx();
        t->cdf[j] = run;
    }
    t->cdf.back() = 1.0;

    MeasureView v;
    v.sampler = [t](Rng& rng, std::size_t n) {
        Mat out(n, 1);
        for (std::size_t i = 0; i < n; ++i) {
            const double u = rng.uniform();
            const auto it = std::lower_bound(t->cdf.begin(), t->cdf.end(), u);
            const auto j = static_cast<std::size_t>(it - t->cdf.begin());
            const double lo_cdf = j ? t->cdf[j - 1] : 0.0;
            const double within = (u - lo_cdf) / std::max(t->cdf[j] - lo_cdf, 1e-300);
            out(i, 0) = t->grid.lo + (static_cast<double>(j) + within) * t->grid.dx();
        }
        return out;
    };
    v.logdensity = [t](const double* xp) {
        const double x = *xp;
        if (x < t->grid.lo || x > t->grid.hi)
            return -std::numeric_limits<double>::infinity();
        const double s = (x - t->grid.lo) / t->grid.dx() - 0.5;  // center coordinate
        if (s <= 0.0) return t->logrho.front();
        if (s >= static_cast<double>(t->grid.cells - 1)) return t->logrho.back();
        const auto j = static_cast<std::size_t>(s);
        const double w = s - static_cast<double>(j);
        return (1.0 - w) * t->logrho[j] + w * t->logrho[j + 1];
    };
    v.descriptor = std::move(descriptor);
    return v;
}

}  // namespace wgf
