#pragma once

#include <functional>

#include "wgf/icnn.hpp"
#include "wgf/potential.hpp"

namespace wgf {

// Discrete-time flow toward the stationary density of
//   d rho/dt = div(rho grad Phi) + inv_beta laplace rho.
// Each step fits a convex psi whose gradient map is the proximal update
//   rho_k = (grad psi_k)_# rho_{k-1},
// trained by descending  w2/(2h) + mean Phi(grad psi) - inv_beta * mean
// logdet hess psi  over minibatches from rho_{k-1}.

using SamplerFn = std::function<Mat(Rng&, std::size_t)>;
using LogDensityFn = std::function<double(const double*)>;

struct JkoChain {
    double h = 0.1;
    double inv_beta = 1.0;
    std::vector<IcnnParams> steps;

    std::size_t dim() const { return steps.empty() ? 0 : steps.front().dim; }
};

struct JkoStepConfig {
    std::vector<std::size_t> widths{64, 64};
    double alpha = 0.01;
    double h = 0.1;
    double inv_beta = 1.0;
    std::size_t iters = 500;
    std::size_t batch = 512;
    double lr = 5e-3;
    AdamConfig adam{};
    PretrainConfig pretrain{};
    // A warm start whose probe mean |grad psi(x) - x|^2 exceeds guard * dim is
    // re-pretrained to the identity before descent.
    double warm_guard = 10.0;
};

struct StepStats {
    std::size_t pretrain_iters = 0;
    IcnnLossTerms first;    // minibatch objective at the first iteration
    IcnnLossTerms last;     // and at the final one
    IcnnLossTerms holdout;  // forward-only evaluation on held-out pool rows
};

// Fits one proximal map over minibatches drawn with replacement from `pool`
// (rows ~ rho_{k-1}). With warm == nullptr a fresh net is pretrained to the
// identity on the pool first. Adam restarts from scratch every step.
IcnnParams jko_train_step(const Mat& pool, const Potential* phi,
                          const JkoStepConfig& cfg, Rng& rng,
                          const IcnnParams* warm = nullptr,
                          StepStats* stats = nullptr);

// One span of a piecewise-constant learning-rate schedule: `lr` applies from
// step index `from` (0-based) until a later span takes over.
struct LrSpan {
    std::size_t from = 0;
    double lr = 5e-3;
};

struct JkoRunConfig {
    std::size_t n_steps = 1;
    std::size_t pool = 32768;
    JkoStepConfig step{};
    // Overrides step.lr per step; spans are applied in order, so the last
    // entry with from <= k wins. Empty: step.lr everywhere.
    std::vector<LrSpan> lr_schedule;
};

using StepCallback = std::function<void(std::size_t step, const StepStats&)>;

// Full flow: materializes a pool from the initial sampler, then alternates
// training a step on the pool and pushing the pool through the trained map.
JkoChain jko_run(const SamplerFn& init_sampler, const Potential* phi,
                 const JkoRunConfig& cfg, Rng& rng,
                 const StepCallback& on_step = {});

// Rows of x through grad psi of steps [0, upto); upto past the end is clamped.
void push_through(const JkoChain& chain, std::size_t upto, Mat& x);

struct FlowSample {
    Mat x;           // n x dim draws from the final measure
    Vec logdensity;  // exact log rho at each row
};

// Exact sampling with pointwise density: fresh initial draws pushed through
// the whole chain, the log density telescoped through per-step logdets.
FlowSample sample_with_density(const JkoChain& chain, const SamplerFn& init_sampler,
                               const LogDensityFn& init_logdensity, Rng& rng,
                               std::size_t n);

struct InvertOptions {
    double tol = 1e-9;  // on |grad psi(x) - y| relative to 1 + |y|
    std::size_t max_iters = 200;
};

struct InvertResult {
    Vec x;
    std::size_t iters = 0;
    double logdet_hess = 0.0;  // logdet hess psi at the solution
};

// Solves grad psi(x) = y: damped Newton on the strongly convex
// psi(x) - y . x, so the solution exists and is unique. Throws
// MaxIterationsExceeded past the budget.
InvertResult invert_grad(const IcnnParams& p, const double* y,
                         const InvertOptions& opt = {});

struct PullbackResult {
    Vec x0;                    // preimage of y under the whole chain
    double logdet_sum = 0.0;   // accumulated logdet hess along the way
};

PullbackResult chain_pullback(const JkoChain& chain, const double* y,
                              const InvertOptions& opt = {});

// log rho_K at an arbitrary point y: log rho_0(x0) - logdet_sum.
double chain_logdensity(const JkoChain& chain, const LogDensityFn& init_logdensity,
                        const double* y, const InvertOptions& opt = {});

}  // namespace wgf
