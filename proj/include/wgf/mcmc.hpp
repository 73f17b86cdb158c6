#pragma once

#include <cstddef>
#include <functional>
#include <vector>

#include "wgf/eval.hpp"
#include "wgf/jko.hpp"

namespace wgf {

// One leg of hidden diffusion between consecutive landmark times, realized as
// a trained transport chain. When observed, y is the measurement at t_end.
struct FilterInterval {
    JkoChain chain;
    double t_begin = 0.0;
    double t_end = 0.0;
    bool observed = false;
    Vec y;
};

struct FilterState {
    double sigma = 1.0;  // observation noise std, shared across observations
    std::size_t dim = 0;
    SamplerFn p0_sampler;
    LogDensityFn p0_logdensity;
    std::vector<FilterInterval> intervals;
};

// Likelihood ratio of two trajectory skeletons (rows: positions at t_0 and at
// each interval end). Pushforward proposals make every determinant and prior
// term cancel, so only the observation likelihoods remain.
double filter_acceptance_ratio(const FilterState& state, const Mat& proposal,
                               const Mat& current);

// Unnormalized log posterior density at x after the first k intervals: traces
// x back through their chains, accumulating log-determinants, observation
// log likelihoods, and the initial log density.
double predictive_logdensity(const FilterState& state, const double* x, std::size_t k,
                             const InvertOptions& opt = {});

struct MhChainConfig {
    std::size_t burn_in = 1000;
    std::size_t thinning = 2;   // keep every thinning-th post-burn-in state
    std::size_t chains = 8;
    std::size_t samples_per_chain = 512;
};

struct MhResult {
    Mat terminal;                 // kept samples at the last interval end
    std::vector<Mat> trajectory;  // kept positions per landmark time, t_0 first
    double acceptance_rate = 0.0;
};

// Independence Metropolis-Hastings targeting the posterior at the end of the
// last interval. Proposals draw from p0 and push through every chain; chains
// run on deterministic per-chain streams seeded off rng. Throws
// DegenerateAcceptance when a 1000-proposal window accepts below 1e-3.
MhResult mh_sample(const FilterState& state, const MhChainConfig& cfg, Rng& rng);

struct FilterConfig {
    double sigma = 1.0;
    std::vector<double> obs_times;  // strictly increasing, all > 0
    Mat observations;               // one row per observation time
    double t_final = 0.0;           // >= last observation time
    std::size_t substeps = 5;       // JKO steps per interval; h = span / substeps
    JkoStepConfig step;             // h is overwritten per interval
    std::size_t train_pool = 4096;  // posterior samples feeding each training
    MhChainConfig mh;
};

using FilterProgressFn =
    std::function<void(std::size_t interval, std::size_t substep, const StepStats&)>;

// Sequential assimilation: trains each interval's chain on samples from the
// previous posterior (via mh_sample), then appends it with its observation.
// With obs_times empty this is plain diffusion of p0 to t_final.
FilterState run_filter(const Potential& phi, const SamplerFn& p0_sampler,
                       const LogDensityFn& p0_logdensity, const FilterConfig& cfg,
                       Rng& rng, const FilterProgressFn& on_step = {});

// Final predictive measure of a 1-D filter state: draws via mh_sample, log
// density by trace-back normalized by quadrature over the grid.
MeasureView predictive_view(const FilterState& state, const Grid1D& grid,
                            const MhChainConfig& cfg, std::string descriptor = "filter");

}  // namespace wgf
