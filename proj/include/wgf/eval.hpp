#pragma once

#include <cstddef>
#include <string>

#include "wgf/baselines.hpp"
#include "wgf/jko.hpp"
#include "wgf/measures.hpp"

namespace wgf {

// A measure exposed as a sampler plus a pointwise log density. When the
// same draw can be produced together with its exact own log density (a flow
// telescopes it for free, an inversion would only recover it approximately),
// `sample_logdensity` supplies the pair and symkl_mc prefers it.
struct MeasureView {
    SamplerFn sampler;
    LogDensityFn logdensity;
    std::function<FlowSample(Rng&, std::size_t)> sample_logdensity;
    std::string descriptor;
};

MeasureView gaussian_view(Gaussian g, std::string descriptor = "gaussian");

// Borrows the chain; the view must not outlive it.
MeasureView chain_view(const JkoChain& chain, SamplerFn init_sampler,
                       LogDensityFn init_logdensity, std::string descriptor = "flow");

// The smoothed measure itself: draws resample a point and add bandwidth noise,
// so sampler and density describe exactly the same mixture.
MeasureView kde_view(Kde kde, std::string descriptor = "kde");

// Piecewise-linear interpolation of log rho between cell centers, -inf outside
// [lo, hi]; draws are inverse-CDF over cells, uniform within a cell. rho need
// not be normalized; zero-mass input throws NegativeDensity.
MeasureView grid_view(const Grid1D& grid, Vec rho, std::string descriptor = "grid");

struct SymklResult {
    double value = 0.0;
    double std_error = 0.0;
    std::size_t n_samples = 0;
    // Percentiles of the pooled directed per-sample log ratios, clipped to
    // +-1e3 for reporting only; the estimate itself is never clipped.
    double ratio_p01 = 0.0;
    double ratio_p99 = 0.0;
};

// Symmetric KL by Monte Carlo: mean of log p - log q over n draws from p plus
// the mirrored term, standard errors combined in quadrature. A non-finite log
// ratio (support mismatch) throws NonFiniteLogRatio naming the sample.
// Requires n_samples >= 100.
SymklResult symkl_mc(const MeasureView& p, const MeasureView& q,
                     std::size_t n_samples, Rng& rng);

}  // namespace wgf
