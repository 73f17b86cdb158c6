#include <doctest.h>

#include <cmath>
#include <vector>

#include "wgf/energy.hpp"
#include "wgf/errors.hpp"
#include "wgf/jko.hpp"
#include "wgf/measures.hpp"
#include "wgf/potential.hpp"

using namespace wgf;

namespace {

IcnnParams pretrained_net(std::size_t dim, std::vector<std::size_t> widths,
                          std::uint64_t seed) {
    Rng rng(seed, 17);
    IcnnParams p = icnn_random_init(dim, std::move(widths), 0.05, rng);
    PretrainConfig pc;
    pc.max_iters = 4000;
    pc.tol = 5e-2;
    icnn_pretrain_identity(p, pc, rng);
    return p;
}

// 4-step flow from N(2, 0.25) toward the quadratic well 0.4 (x - 0.3)^2,
// inv_beta 0.7; the closed-form marginal at t = 4 * 0.05 is the reference.
struct OuFlow {
    Potential phi = make_quadratic(Mat(1, 1, 0.8), Vec{0.3});
    Gaussian init{Vec{2.0}, Mat(1, 1, 0.25)};
    double inv_beta = 0.7;
    double h = 0.05;
    JkoChain chain;
    std::vector<StepStats> stats;

    OuFlow() {
        JkoRunConfig cfg;
        cfg.n_steps = 4;
        cfg.pool = 4096;
        cfg.step.widths = {16, 16};
        cfg.step.alpha = 0.05;
        cfg.step.h = h;
        cfg.step.inv_beta = inv_beta;
        cfg.step.iters = 500;
        cfg.step.batch = 256;
        cfg.step.lr = 5e-3;
        cfg.step.pretrain.tol = 2e-3;
        Rng rng(2024, 11);
        chain = jko_run(
            [&](Rng& r, std::size_t n) { return init.sample_n(r, n); }, &phi, cfg, rng,
            [&](std::size_t, const StepStats& st) { stats.push_back(st); });
    }

    SamplerFn sampler() const {
        return [this](Rng& r, std::size_t n) { return init.sample_n(r, n); };
    }
    LogDensityFn logdensity() const {
        return [this](const double* x) { return init.logpdf(x); };
    }
};

const OuFlow& ou_flow() {
    static const OuFlow flow;
    return flow;
}

}  // namespace

TEST_SUITE("jko") {

TEST_CASE("invert_grad recovers gradient preimages") {
    for (const std::size_t dim : {1u, 2u, 4u}) {
        const IcnnParams p = pretrained_net(dim, {8, 6}, 100 + dim);
        Rng rng(7 * dim + 1, 3);
        for (int rep = 0; rep < 30; ++rep) {
            Vec z(dim);
            for (auto& v : z) v = 2.5 * rng.normal();
            const IcnnEval fw = icnn_eval(p, z.data(), {.grad = true, .hess = true});

            const InvertResult inv = invert_grad(p, fw.grad.data());
            // Residual at the declared tolerance.
            const IcnnEval back = icnn_eval(p, inv.x.data(), {.grad = true, .hess = true});
            double res = 0.0, yn = 0.0, dz = 0.0;
            for (std::size_t i = 0; i < dim; ++i) {
                res += (back.grad[i] - fw.grad[i]) * (back.grad[i] - fw.grad[i]);
                yn += fw.grad[i] * fw.grad[i];
                dz += (inv.x[i] - z[i]) * (inv.x[i] - z[i]);
            }
            CHECK(std::sqrt(res) <= 1e-9 * (1.0 + std::sqrt(yn)));
            // Strong convexity makes the preimage unique.
            CHECK(std::sqrt(dz) <= 1e-6 * (1.0 + std::sqrt(yn)));
            CHECK(inv.logdet_hess == doctest::Approx(back.logdet_hess).epsilon(1e-10));
        }
    }
}

TEST_CASE("one proximal step matches the gaussian prox") {
    const double a = 1.5, h = 0.2, mu0 = 1.0, sig0 = 0.5;
    const Potential phi = make_quadratic(Mat(1, 1, a), Vec{0.0});
    const Gaussian start(Vec{mu0}, Mat(1, 1, sig0 * sig0));

    Rng rng(55, 21);
    const Mat pool = start.sample_n(rng, 4096);
    // The prox below acts on the empirical pool, so the oracle moments use the
    // empirical starting moments (the mean identity E[T] = mean0 / (1 + a h)
    // is exact for any starting measure).
    double mu_hat = 0.0, var_hat = 0.0;
    for (const double v : pool.a) mu_hat += v;
    mu_hat /= static_cast<double>(pool.rows);
    for (const double v : pool.a) var_hat += (v - mu_hat) * (v - mu_hat);
    var_hat /= static_cast<double>(pool.rows);
    const double sig_hat = std::sqrt(var_hat);

    JkoStepConfig cfg;
    cfg.widths = {16, 16};
    cfg.alpha = 0.05;
    cfg.h = h;
    cfg.iters = 800;
    cfg.batch = 256;
    cfg.lr = 5e-3;
    cfg.pretrain.tol = 2e-3;
    JkoStepConfig refine = cfg;
    refine.iters = 600;
    refine.lr = 1e-3;

    SUBCASE("with the entropy term") {
        cfg.inv_beta = 1.0;
        refine.inv_beta = 1.0;
        StepStats st;
        const IcnnParams coarse = jko_train_step(pool, &phi, cfg, rng, nullptr, &st);
        CHECK(st.pretrain_iters > 0);
        const IcnnParams p = jko_train_step(pool, &phi, refine, rng, &coarse);

        Mat pushed;
        icnn_push(p, pool, pushed);
        double m = 0.0, s2 = 0.0;
        for (const double v : pushed.a) m += v;
        m /= static_cast<double>(pushed.rows);
        for (const double v : pushed.a) s2 += (v - m) * (v - m);
        s2 /= static_cast<double>(pushed.rows);

        const double c = 1.0 + a * h;
        const double m_star = mu_hat / c;
        const double s_star = (sig_hat + std::sqrt(var_hat + 4.0 * c * h)) / (2.0 * c);
        CHECK(std::abs(m - m_star) < 0.02);
        CHECK(std::abs(std::sqrt(s2) - s_star) < 0.03);
    }
    SUBCASE("without entropy the map is a pointwise shrink") {
        cfg.inv_beta = 0.0;
        refine.inv_beta = 0.0;
        const IcnnParams coarse = jko_train_step(pool, &phi, cfg, rng);
        const IcnnParams p = jko_train_step(pool, &phi, refine, rng, &coarse);
        Mat pushed;
        icnn_push(p, pool, pushed);
        double dev = 0.0;
        for (std::size_t i = 0; i < pool.rows; ++i)
            dev += std::abs(pushed(i, 0) - pool(i, 0) / (1.0 + a * h));
        dev /= static_cast<double>(pool.rows);
        CHECK(dev < 0.02);
    }
}

TEST_CASE("four steps track the closed-form marginal") {
    const OuFlow& f = ou_flow();
    const Gaussian ref = ou_gaussian(std::get<QuadraticPotential>(f.phi), f.init,
                                     f.inv_beta, 4.0 * f.h);

    Rng rng(9, 2);
    const FlowSample fs = sample_with_density(f.chain, f.sampler(), f.logdensity(), rng, 4000);
    double m = 0.0, s2 = 0.0;
    for (const double v : fs.x.a) m += v;
    m /= static_cast<double>(fs.x.rows);
    for (const double v : fs.x.a) s2 += (v - m) * (v - m);
    s2 /= static_cast<double>(fs.x.rows);

    CHECK(std::abs(m - ref.mean()[0]) < 0.05);
    CHECK(std::abs(std::sqrt(s2) - std::sqrt(ref.cov()(0, 0))) < 0.05);
}

TEST_CASE("forward density agrees with the traced-back density") {
    const OuFlow& f = ou_flow();
    Rng rng(13, 5);
    const FlowSample fs = sample_with_density(f.chain, f.sampler(), f.logdensity(), rng, 100);
    for (std::size_t i = 0; i < fs.x.rows; ++i) {
        const double back = chain_logdensity(f.chain, f.logdensity(), fs.x.row(i));
        CHECK(std::abs(back - fs.logdensity[i]) <= 1e-6 * (1.0 + std::abs(fs.logdensity[i])));
    }
}

TEST_CASE("pushforward density integrates to one") {
    const OuFlow& f = ou_flow();
    const auto ld = f.logdensity();
    double mass = 0.0;
    const double lo = -3.0, hi = 6.5, dx = 2.5e-3;
    const auto n = static_cast<std::size_t>((hi - lo) / dx);
    for (std::size_t i = 0; i <= n; ++i) {
        const double y = lo + dx * static_cast<double>(i);
        const double w = (i == 0 || i == n) ? 0.5 : 1.0;
        mass += w * std::exp(chain_logdensity(f.chain, ld, &y));
    }
    mass *= dx;
    CHECK(mass == doctest::Approx(1.0).epsilon(2e-3));
}

TEST_CASE("free energy decreases along the flow") {
    const OuFlow& f = ou_flow();
    Vec energies;
    for (std::size_t k = 0; k <= f.chain.steps.size(); ++k) {
        JkoChain prefix;
        prefix.h = f.chain.h;
        prefix.inv_beta = f.chain.inv_beta;
        prefix.steps.assign(f.chain.steps.begin(), f.chain.steps.begin() + k);
        Rng rng(31 + k, 8);
        const FlowSample fs =
            sample_with_density(prefix, f.sampler(), f.logdensity(), rng, 4000);
        energies.push_back(
            fp_energy_estimate(f.phi, f.inv_beta, fs.x, fs.logdensity).total);
    }
    for (std::size_t k = 1; k < energies.size(); ++k)
        CHECK(energies[k] <= energies[k - 1] + 0.03);
    CHECK(energies.front() - energies.back() > 0.25);
}

TEST_CASE("warm starts skip pretraining") {
    const OuFlow& f = ou_flow();
    REQUIRE(f.stats.size() == 4);
    CHECK(f.stats[0].pretrain_iters > 0);
    for (std::size_t k = 1; k < f.stats.size(); ++k) CHECK(f.stats[k].pretrain_iters == 0);
    // No step blew the objective up (first is a single-minibatch estimate, so
    // the margin covers its sampling noise).
    for (const auto& st : f.stats) CHECK(st.holdout.total <= st.first.total + 0.2);
}

TEST_CASE("push_through composes the trained maps") {
    const OuFlow& f = ou_flow();
    Rng rng(3, 3);
    Mat x = f.init.sample_n(rng, 64);
    Mat manual = x;
    for (const auto& step : f.chain.steps) {
        Mat g;
        icnn_push(step, manual, g);
        manual = std::move(g);
    }
    push_through(f.chain, 99, x);  // clamped to all steps
    for (std::size_t i = 0; i < x.size(); ++i) CHECK(x.a[i] == manual.a[i]);
}

TEST_CASE("argument validation") {
    const Mat pool(32, 1, 0.5);
    JkoStepConfig cfg;
    cfg.widths = {4};
    Rng rng(1, 1);

    JkoStepConfig bad = cfg;
    bad.h = 0.0;
    CHECK_THROWS_AS(jko_train_step(pool, nullptr, bad, rng), InvalidArgument);
    bad = cfg;
    bad.batch = 0;
    CHECK_THROWS_AS(jko_train_step(pool, nullptr, bad, rng), InvalidArgument);
    CHECK_THROWS_AS(jko_train_step(Mat(0, 1), nullptr, cfg, rng), InvalidArgument);

    const IcnnParams wrong = icnn_zeroed(2, {4}, 0.05);
    CHECK_THROWS_AS(jko_train_step(pool, nullptr, cfg, rng, &wrong), DimensionMismatch);

    JkoRunConfig rc;
    CHECK_THROWS_AS(jko_run({}, nullptr, rc, rng), InvalidArgument);
    rc.pool = 8;
    rc.step.batch = 64;
    CHECK_THROWS_AS(
        jko_run([](Rng& r, std::size_t n) { return Mat(n, 1, r.normal()); }, nullptr, rc,
                rng),
        InvalidArgument);

    const JkoChain empty;
    const double y = 0.0;
    CHECK_THROWS_AS(chain_pullback(empty, &y), InvalidArgument);
    CHECK_THROWS_AS(sample_with_density(empty, {}, {}, rng, 4), InvalidArgument);
}

}  // TEST_SUITE
