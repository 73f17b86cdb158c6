#include "wgf/jko.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "wgf/errors.hpp"
#include "wgf/kernels.hpp"

namespace wgf {

namespace {

void gather_rows(const Mat& pool, Rng& rng, Mat& out) {
    for (std::size_t i = 0; i < out.rows; ++i) {
        const double* src = pool.row(rng.uniform_index(pool.rows));
        std::copy(src, src + pool.cols, out.row(i));
    }
}

// mean |grad psi(x) - x|^2 on the leading pool rows; cheap warm-start probe.
double probe_w2(const IcnnParams& p, const Mat& pool) {
    const std::size_t n = std::min<std::size_t>(pool.rows, 1024);
    Mat x(n, pool.cols);
    std::copy(pool.data(), pool.data() + n * pool.cols, x.data());
    Mat g;
    icnn_push(p, x, g);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        const double d = g.a[i] - x.a[i];
        acc += d * d;
    }
    return acc / static_cast<double>(n);
}

}  // namespace

IcnnParams jko_train_step(const Mat& pool, const Potential* phi,
                          const JkoStepConfig& cfg, Rng& rng, const IcnnParams* warm,
                          StepStats* stats) {
    if (pool.rows == 0 || pool.cols == 0)
        throw InvalidArgument("jko_train_step: empty pool");
    if (!(cfg.h > 0.0)) throw InvalidArgument("jko_train_step: h must be positive");
    if (cfg.inv_beta < 0.0)
        throw InvalidArgument("jko_train_step: inv_beta must be nonnegative");
    if (cfg.iters == 0 || cfg.batch == 0)
        throw InvalidArgument("jko_train_step: iters and batch must be positive");
    const std::size_t dim = pool.cols;

    StepStats st{};
    IcnnParams p;
    if (warm) {
        if (warm->dim != dim)
            throw DimensionMismatch("jko_train_step: warm start dim differs from pool");
        p = *warm;
        if (probe_w2(p, pool) > cfg.warm_guard * static_cast<double>(dim))
            st.pretrain_iters = icnn_pretrain_identity(p, cfg.pretrain, rng, &pool).iters;
    } else {
        p = icnn_random_init(dim, cfg.widths, cfg.alpha, rng);
        st.pretrain_iters = icnn_pretrain_identity(p, cfg.pretrain, rng, &pool).iters;
    }

    AdamState adam = adam_init(p);
    IcnnGrads g = icnn_grads_like(p);
    Mat batch(std::min(cfg.batch, pool.rows), dim);
    std::size_t iter = 0;
    try {
        for (; iter < cfg.iters; ++iter) {
            gather_rows(pool, rng, batch);
            const IcnnLossTerms terms =
                icnn_loss_grad(p, batch, phi, cfg.h, cfg.inv_beta, g, &rng);
            adam_step(p, g, adam, cfg.lr, cfg.adam);
            if (iter == 0) st.first = terms;
            st.last = terms;
        }
    } catch (const NonFiniteLoss& e) {
        throw NonFiniteLoss("jko_train_step: iteration " + std::to_string(iter) + ": " +
                            e.what());
    }

    Mat hold(std::min<std::size_t>(pool.rows, 2048), dim);
    gather_rows(pool, rng, hold);
    st.holdout = icnn_loss(p, hold, phi, cfg.h, cfg.inv_beta, &rng);
    if (stats) *stats = st;
    return p;
}

JkoChain jko_run(const SamplerFn& init_sampler, const Potential* phi,
                 const JkoRunConfig& cfg, Rng& rng, const StepCallback& on_step) {
    if (!init_sampler) throw InvalidArgument("jko_run: no initial sampler");
    if (cfg.n_steps == 0) throw InvalidArgument("jko_run: n_steps must be positive");
    if (cfg.pool < cfg.step.batch)
        throw InvalidArgument("jko_run: pool smaller than a minibatch");

    Mat pool = init_sampler(rng, cfg.pool);
    if (pool.rows != cfg.pool || pool.cols == 0)
        throw InvalidArgument("jko_run: sampler returned a bad shape");
    if (phi) {
        const std::size_t pd = potential_dim(*phi);
        if (pd != 0 && pd != pool.cols)
            throw DimensionMismatch("jko_run: potential dim differs from samples");
    }

    JkoChain chain;
    chain.h = cfg.step.h;
    chain.inv_beta = cfg.step.inv_beta;
    chain.steps.reserve(cfg.n_steps);
    for (std::size_t k = 0; k < cfg.n_steps; ++k) {
        JkoStepConfig scfg = cfg.step;
        for (const auto& span : cfg.lr_schedule)
            if (k >= span.from) scfg.lr = span.lr;
        StepStats st;
        const IcnnParams* warm = chain.steps.empty() ? nullptr : &chain.steps.back();
        IcnnParams p = jko_train_step(pool, phi, scfg, rng, warm, &st);
        Mat pushed;
        icnn_push(p, pool, pushed);
        pool = std::move(pushed);
        chain.steps.push_back(std::move(p));
        if (on_step) on_step(k, st);
    }
    return chain;
}

void push_through(const JkoChain& chain, std::size_t upto, Mat& x) {
    upto = std::min(upto, chain.steps.size());
    for (std::size_t k = 0; k < upto; ++k) {
        Mat g;
        icnn_push(chain.steps[k], x, g);
        x = std::move(g);
    }
}

FlowSample sample_with_density(const JkoChain& chain, const SamplerFn& init_sampler,
                               const LogDensityFn& init_logdensity, Rng& rng,
                               std::size_t n) {
    if (!init_sampler || !init_logdensity)
        throw InvalidArgument("sample_with_density: missing initial measure");
    FlowSample fs;
    fs.x = init_sampler(rng, n);
    if (fs.x.rows != n || (!chain.steps.empty() && fs.x.cols != chain.dim()))
        throw DimensionMismatch("sample_with_density: sampler shape mismatch");
    fs.logdensity.resize(n);
    for (std::size_t i = 0; i < n; ++i) fs.logdensity[i] = init_logdensity(fs.x.row(i));
    Vec logdets;
    for (const auto& step : chain.steps) {
        Mat g;
        icnn_push_logdet(step, fs.x, g, logdets);
        for (std::size_t i = 0; i < n; ++i) fs.logdensity[i] -= logdets[i];
        fs.x = std::move(g);
    }
    return fs;
}

InvertResult invert_grad(const IcnnParams& p, const double* y, const InvertOptions& opt) {
    const std::size_t d = p.dim;
    InvertResult res;
    res.x.assign(y, y + d);
    const double tol = opt.tol * (1.0 + std::sqrt(kernels::sqnorm(y, d)));

    // Damped Newton on the residual r = grad psi(x) - y. The merit function is
    // |r|^2, built from gradient differences, so it stays meaningful far below
    // where psi-value comparisons drown in rounding. The Newton direction has
    // slope exactly -2 |r|^2 for it.
    const auto rsq_of = [&](const Vec& grad, Vec& r) {
        double acc = 0.0;
        for (std::size_t i = 0; i < d; ++i) {
            r[i] = grad[i] - y[i];
            acc += r[i] * r[i];
        }
        return acc;
    };

    IcnnEval ev = icnn_eval(p, res.x.data(), {.grad = true, .hess = true});
    Vec r(d), rt(d), dir(d), xt(d);
    double rsq = rsq_of(ev.grad, r);
    for (res.iters = 0; res.iters < opt.max_iters; ++res.iters) {
        if (std::sqrt(rsq) <= tol) {
            res.logdet_hess = ev.logdet_hess;
            return res;
        }
        dir = ev.hess_chol.solve_copy(r);
        for (std::size_t i = 0; i < d; ++i) dir[i] = -dir[i];
        double t = 1.0;
        for (int bt = 0; bt < 60; ++bt) {
            for (std::size_t i = 0; i < d; ++i) xt[i] = res.x[i] + t * dir[i];
            const IcnnEval trial = icnn_eval(p, xt.data(), {.grad = true});
            if (rsq_of(trial.grad, rt) <= rsq * (1.0 - 2e-4 * t)) break;
            t *= 0.5;
        }
        res.x = xt;
        ev = icnn_eval(p, res.x.data(), {.grad = true, .hess = true});
        rsq = rsq_of(ev.grad, r);
    }
    throw MaxIterationsExceeded("invert_grad: no convergence in " +
                                std::to_string(opt.max_iters) + " iterations");
}

PullbackResult chain_pullback(const JkoChain& chain, const double* y,
                              const InvertOptions& opt) {
    PullbackResult pr;
    const std::size_t d = chain.steps.empty() ? 0 : chain.dim();
    if (d == 0) throw InvalidArgument("chain_pullback: empty chain");
    pr.x0.assign(y, y + d);
    for (std::size_t k = chain.steps.size(); k-- > 0;) {
        InvertResult ir = invert_grad(chain.steps[k], pr.x0.data(), opt);
        pr.logdet_sum += ir.logdet_hess;
        pr.x0 = std::move(ir.x);
    }
    return pr;
}

double chain_logdensity(const JkoChain& chain, const LogDensityFn& init_logdensity,
                        const double* y, const InvertOptions& opt) {
    if (!init_logdensity) throw InvalidArgument("chain_logdensity: no initial density");
    if (chain.steps.empty()) return init_logdensity(y);
    const PullbackResult pr = chain_pullback(chain, y, opt);
    return init_logdensity(pr.x0.data()) - pr.logdet_sum;
}

}  // namespace wgf
