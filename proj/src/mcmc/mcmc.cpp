#include "wgf/mcmc.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

#include "wgf/errors.hpp"

namespace wgf {

namespace {

constexpr double kTwoPi = 6.283185307179586476925286766559;

void check_state(const FilterState& state) {
    if (state.dim == 0) throw InvalidArgument("filter: state dimension is zero");
    if (!(state.sigma > 0.0))
        throw InvalidArgument("filter: sigma must be positive, got " +
                              std::to_string(state.sigma));
    for (std::size_t i = 0; i < state.intervals.size(); ++i) {
        const FilterInterval& iv = state.intervals[i];
        if (iv.observed && iv.y.size() != state.dim)
            throw DimensionMismatch("filter: observation " + std::to_string(i) +
                                    " has dim " + std::to_string(iv.y.size()));
        if (!iv.chain.steps.empty() && iv.chain.dim() != state.dim)
            throw DimensionMismatch("filter: interval " + std::to_string(i) +
                                    " chain has dim " + std::to_string(iv.chain.dim()));
    }
}

double sq_dist(const double* a, const double* b, std::size_t d) {
    double s = 0.0;
    for (std::size_t i = 0; i < d; ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return s;
}

// Observation log likelihoods of one trajectory skeleton, constants dropped
// (every caller takes a difference).
double traj_loglik(const FilterState& state, const Mat& traj) {
    double ll = 0.0;
    for (std::size_t i = 0; i < state.intervals.size(); ++i) {
        const FilterInterval& iv = state.intervals[i];
        if (!iv.observed) continue;
        ll -= sq_dist(traj.row(i + 1), iv.y.data(), state.dim) /
              (2.0 * state.sigma * state.sigma);
    }
    return ll;
}

void check_traj(const FilterState& state, const Mat& traj, const char* name) {
    if (traj.rows != state.intervals.size() + 1 || traj.cols != state.dim)
        throw DimensionMismatch(std::string("filter: ") + name + " trajectory is " +
                                std::to_string(traj.rows) + "x" +
                                std::to_string(traj.cols) + ", want " +
                                std::to_string(state.intervals.size() + 1) + "x" +
                                std::to_string(state.dim));
}

Mat gather_rows(const Mat& src, std::size_t n, Rng& rng) {
    Mat out(n, src.cols);
    for (std::size_t i = 0; i < n; ++i) {
        const double* r = src.row(rng.uniform_index(src.rows));
        std::copy(r, r + src.cols, out.row(i));
    }
    return out;
}

}  // namespace

double filter_acceptance_ratio(const FilterState& state, const Mat& proposal,
                               const Mat& current) {
    check_state(state);
    check_traj(state, proposal, "proposal");
    check_traj(state, current, "current");
    return std::exp(traj_loglik(state, proposal) - traj_loglik(state, current));
}

double predictive_logdensity(const FilterState& state, const double* x, std::size_t k,
                             const InvertOptions& opt) {
    check_state(state);
    if (k > state.intervals.size())
        throw StageOutOfRange("predictive_logdensity: k = " + std::to_string(k) +
                              " past " + std::to_string(state.intervals.size()) +
                              " intervals");
    if (!state.p0_logdensity)
        throw InvalidArgument("predictive_logdensity: state has no p0 log density");

    const double obs_const =
        -0.5 * static_cast<double>(state.dim) *
        std::log(kTwoPi * state.sigma * state.sigma);
    Vec cur(x, x + state.dim);
    double total = 0.0;
    for (std::size_t i = k; i-- > 0;) {
        const FilterInterval& iv = state.intervals[i];
        if (iv.observed)
            total += obs_const -
                     sq_dist(cur.data(), iv.y.data(), state.dim) /
                         (2.0 * state.sigma * state.sigma);
        if (!iv.chain.steps.empty()) {
            PullbackResult pr = chain_pullback(iv.chain, cur.data(), opt);
            total -= pr.logdet_sum;
            cur = std::move(pr.x0);
        }
    }
    return total + state.p0_logdensity(cur.data());
}

MhResult mh_sample(const FilterState& state, const MhChainConfig& cfg, Rng& rng) {
    check_state(state);
    if (!state.p0_sampler) throw InvalidArgument("mh_sample: state has no p0 sampler");
    if (cfg.thinning == 0) throw InvalidArgument("mh_sample: thinning must be >= 1");
    if (cfg.chains == 0 || cfg.samples_per_chain == 0)
        throw InvalidArgument("mh_sample: need at least one chain and one sample");

    const std::size_t m = state.intervals.size();
    const std::size_t n_prop = cfg.burn_in + cfg.thinning * cfg.samples_per_chain;
    const std::size_t kept_total = cfg.chains * cfg.samples_per_chain;
    constexpr std::size_t kWindow = 1000;

    MhResult out;
    out.trajectory.assign(m + 1, Mat(kept_total, state.dim));
    std::size_t accepts = 0, proposals = 0, slot = 0;

    const std::uint64_t master = rng.uniform_index(std::uint64_t{1} << 62);
    for (std::size_t c = 0; c < cfg.chains; ++c) {
        Rng cr(master, c);
        std::vector<Mat> stage(m + 1);
        stage[0] = state.p0_sampler(cr, n_prop);
        if (stage[0].rows != n_prop || stage[0].cols != state.dim)
            throw DimensionMismatch("mh_sample: p0 sampler returned " +
                                    std::to_string(stage[0].rows) + "x" +
                                    std::to_string(stage[0].cols));
        for (std::size_t i = 0; i < m; ++i) {
            Mat next = stage[i];
            push_through(state.intervals[i].chain, state.intervals[i].chain.steps.size(),
                         next);
            stage[i + 1] = std::move(next);
        }

        Vec ll(n_prop);
        for (std::size_t j = 0; j < n_prop; ++j) {
            double v = 0.0;
            for (std::size_t i = 0; i < m; ++i) {
                const FilterInterval& iv = state.intervals[i];
                if (!iv.observed) continue;
                v -= sq_dist(stage[i + 1].row(j), iv.y.data(), state.dim) /
                     (2.0 * state.sigma * state.sigma);
            }
            ll[j] = v;
        }

        std::size_t cur = 0, win_n = 0, win_acc = 0;
        for (std::size_t j = 0; j < n_prop; ++j) {
            if (j > 0) {
                ++proposals;
                ++win_n;
                const double log_alpha = ll[j] - ll[cur];
                if (log_alpha >= 0.0 || cr.uniform() < std::exp(log_alpha)) {
                    cur = j;
                    ++accepts;
                    ++win_acc;
                }
                if (win_n == kWindow) {
                    if (static_cast<double>(win_acc) <
                        1e-3 * static_cast<double>(kWindow))
                        throw DegenerateAcceptance(
                            "mh_sample: chain " + std::to_string(c) + " accepted " +
                            std::to_string(win_acc) + " of " + std::to_string(kWindow) +
                            " proposals; observations conflict with the prior flow");
                    win_n = win_acc = 0;
                }
            }
            if (j >= cfg.burn_in && (j - cfg.burn_in) % cfg.thinning == 0) {
                for (std::size_t i = 0; i <= m; ++i)
                    std::copy(stage[i].row(cur), stage[i].row(cur) + state.dim,
                              out.trajectory[i].row(slot));
                ++slot;
            }
        }
    }

    out.terminal = out.trajectory.back();
    out.acceptance_rate =
        proposals ? static_cast<double>(accepts) / static_cast<double>(proposals) : 1.0;
    return out;
}

FilterState run_filter(const Potential& phi, const SamplerFn& p0_sampler,
                       const LogDensityFn& p0_logdensity, const FilterConfig& cfg,
                       Rng& rng, const FilterProgressFn& on_step) {
    if (!p0_sampler || !p0_logdensity)
        throw InvalidArgument("run_filter: initial sampler and log density are required");
    if (!(cfg.sigma > 0.0)) throw InvalidArgument("run_filter: sigma must be positive");
    if (cfg.substeps == 0) throw InvalidArgument("run_filter: substeps must be >= 1");
    if (cfg.train_pool == 0) throw InvalidArgument("run_filter: empty training pool");
    if (cfg.observations.rows != cfg.obs_times.size())
        throw DimensionMismatch("run_filter: " + std::to_string(cfg.obs_times.size()) +
                                " observation times but " +
                                std::to_string(cfg.observations.rows) + " rows");
    double prev = 0.0;
    for (const double t : cfg.obs_times) {
        if (!(t > prev))
            throw InvalidArgument("run_filter: observation times must be strictly "
                                  "increasing and positive");
        prev = t;
    }
    if (!(cfg.t_final >= prev) || cfg.t_final <= 0.0)
        throw InvalidArgument("run_filter: t_final must reach past the observations");

    std::vector<double> ends = cfg.obs_times;
    if (ends.empty() || cfg.t_final > ends.back()) ends.push_back(cfg.t_final);

    FilterState state;
    state.sigma = cfg.sigma;
    state.p0_sampler = p0_sampler;
    state.p0_logdensity = p0_logdensity;

    Mat pool = p0_sampler(rng, cfg.train_pool);
    if (pool.rows != cfg.train_pool || pool.cols == 0)
        throw DimensionMismatch("run_filter: p0 sampler returned " +
                                std::to_string(pool.rows) + "x" +
                                std::to_string(pool.cols));
    state.dim = pool.cols;
    if (cfg.observations.rows > 0 && cfg.observations.cols != state.dim)
        throw DimensionMismatch("run_filter: observations have dim " +
                                std::to_string(cfg.observations.cols));

    MhChainConfig mh = cfg.mh;
    mh.samples_per_chain = (cfg.train_pool + mh.chains - 1) / mh.chains;

    double t_prev = 0.0;
    for (std::size_t k = 0; k < ends.size(); ++k) {
        JkoRunConfig rc;
        rc.n_steps = cfg.substeps;
        rc.pool = pool.rows;
        rc.step = cfg.step;
        rc.step.h = (ends[k] - t_prev) / static_cast<double>(cfg.substeps);

        // jko_run materializes its pool through this sampler; any other size
        // falls back to resampling rows.
        const Mat interval_pool = std::move(pool);
        const SamplerFn pool_sampler = [&interval_pool](Rng& r, std::size_t n) {
            if (n == interval_pool.rows) return interval_pool;
            return gather_rows(interval_pool, n, r);
        };
        const StepCallback cb =
            on_step ? StepCallback([&on_step, k](std::size_t s, const StepStats& st) {
                on_step(k, s, st);
            })
                    : StepCallback{};
        FilterInterval iv;
        iv.chain = jko_run(pool_sampler, &phi, rc, rng, cb);
        iv.t_begin = t_prev;
        iv.t_end = ends[k];
        iv.observed = k < cfg.obs_times.size();
        if (iv.observed) {
            const double* r = cfg.observations.row(k);
            iv.y.assign(r, r + state.dim);
        }
        state.intervals.push_back(std::move(iv));
        t_prev = ends[k];

        if (k + 1 < ends.size()) pool = mh_sample(state, mh, rng).terminal;
    }
    return state;
}

MeasureView predictive_view(const FilterState& state, const Grid1D& grid,
                            const MhChainConfig& cfg, std::string descriptor) {
    check_state(state);
    if (state.dim != 1)
        throw InvalidArgument("predictive_view: quadrature normalization is 1-D only");
    if (!state.p0_sampler || !state.p0_logdensity)
        throw InvalidArgument("predictive_view: state is missing its initial measure");

    // log of the normalizing constant by midpoint quadrature over the grid.
    const std::size_t k = state.intervals.size();
    Vec logvals(grid.cells);
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t j = 0; j < grid.cells; ++j) {
        const double c = grid.center(j);
        logvals[j] = predictive_logdensity(state, &c, k);
        top = std::max(top, logvals[j]);
    }
    double acc = 0.0;
    for (const double lv : logvals) acc += std::exp(lv - top);
    const double log_z = top + std::log(acc * grid.dx());

    MeasureView v;
    v.sampler = [&state, cfg](Rng& rng, std::size_t n) {
        MhChainConfig local = cfg;
        local.samples_per_chain = (n + local.chains - 1) / local.chains;
        Mat all = mh_sample(state, local, rng).terminal;
        if (all.rows == n) return all;
        Mat out(n, all.cols);
        std::copy(all.a.begin(), all.a.begin() + static_cast<std::ptrdiff_t>(n * all.cols),
                  out.a.begin());
        return out;
    };
    v.logdensity = [&state, k, log_z](const double* x) {
        return predictive_logdensity(state, x, k) - log_z;
    };
    v.descriptor = std::move(descriptor);
    return v;
}

}  // namespace wgf
