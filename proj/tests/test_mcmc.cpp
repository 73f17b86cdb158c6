#include <doctest.h>

#include <cmath>

#include "wgf/errors.hpp"
#include "wgf/mcmc.hpp"

using namespace wgf;

namespace {

SamplerFn gaussian_sampler(double mean, double var) {
    const Gaussian g(Vec{mean}, Mat(1, 1, var));
    return [g](Rng& rng, std::size_t n) { return g.sample_n(rng, n); };
}

LogDensityFn gaussian_logdensity(double mean, double var) {
    const Gaussian g(Vec{mean}, Mat(1, 1, var));
    return [g](const double* x) { return g.logpdf(x); };
}

// One observed interval whose transport is the identity (empty chain).
FilterState identity_state(double p0_mean, double p0_var, double y, double sigma) {
    FilterState s;
    s.sigma = sigma;
    s.dim = 1;
    s.p0_sampler = gaussian_sampler(p0_mean, p0_var);
    s.p0_logdensity = gaussian_logdensity(p0_mean, p0_var);
    FilterInterval iv;
    iv.t_end = 0.5;
    iv.observed = true;
    iv.y = Vec{y};
    s.intervals.push_back(std::move(iv));
    return s;
}

void sample_moments(const Mat& x, double& mean, double& var) {
    mean = 0.0;
    var = 0.0;
    for (const double v : x.a) mean += v;
    mean /= static_cast<double>(x.rows);
    for (const double v : x.a) var += (v - mean) * (v - mean);
    var /= static_cast<double>(x.rows);
}

}  // namespace

TEST_SUITE("mcmc") {

TEST_CASE("acceptance ratio is the likelihood ratio") {
    const FilterState s = identity_state(0.0, 1.0, 0.4, 1.0);
    Mat prop(2, 1), cur(2, 1);
    prop(1, 0) = 0.4;       // proposal terminal hits the observation
    cur(1, 0) = 0.4 + 1.0;  // current misses by one sigma
    CHECK(filter_acceptance_ratio(s, prop, cur) ==
          doctest::Approx(std::exp(0.5)).epsilon(1e-12));

    SUBCASE("reciprocity") {
        Rng rng(3, 1);
        for (int rep = 0; rep < 5; ++rep) {
            Mat a(2, 1), b(2, 1);
            a(0, 0) = rng.normal();
            a(1, 0) = rng.normal();
            b(0, 0) = rng.normal();
            b(1, 0) = rng.normal();
            CHECK(filter_acceptance_ratio(s, a, b) * filter_acceptance_ratio(s, b, a) ==
                  doctest::Approx(1.0).epsilon(1e-12));
        }
    }
    SUBCASE("no observations means ratio one") {
        FilterState empty;
        empty.sigma = 1.0;
        empty.dim = 1;
        empty.p0_sampler = gaussian_sampler(0.0, 1.0);
        empty.p0_logdensity = gaussian_logdensity(0.0, 1.0);
        CHECK(filter_acceptance_ratio(empty, Mat(1, 1, 0.3), Mat(1, 1, -2.0)) == 1.0);
    }
    SUBCASE("shape validation") {
        CHECK_THROWS_AS(filter_acceptance_ratio(s, Mat(3, 1), cur), DimensionMismatch);
        CHECK_THROWS_AS(filter_acceptance_ratio(s, prop, Mat(2, 2)), DimensionMismatch);
    }
}

TEST_CASE("trace-back density with identity chains") {
    const FilterState s = identity_state(1.0, 0.49, 0.2, 0.8);
    const Gaussian p0(Vec{1.0}, Mat(1, 1, 0.49));
    for (const double x : {-1.0, 0.0, 0.7, 2.0}) {
        const double want =
            p0.logpdf(&x) - 0.5 * std::log(2 * 3.14159265358979323846 * 0.64) -
            (x - 0.2) * (x - 0.2) / (2 * 0.64);
        CHECK(predictive_logdensity(s, &x, 1) == doctest::Approx(want).epsilon(1e-12));
        CHECK(predictive_logdensity(s, &x, 0) == doctest::Approx(p0.logpdf(&x)));
    }
    const double x = 0.3;
    CHECK_THROWS_AS(predictive_logdensity(s, &x, 2), StageOutOfRange);
}

TEST_CASE("mh recovers the conjugate posterior") {
    const double p0_mean = 1.0, p0_var = 0.49, y = 0.2, sigma = 0.8;
    const FilterState s = identity_state(p0_mean, p0_var, y, sigma);
    const double prec = 1.0 / p0_var + 1.0 / (sigma * sigma);
    const double post_var = 1.0 / prec;
    const double post_mean = post_var * (p0_mean / p0_var + y / (sigma * sigma));

    MhChainConfig cfg;
    cfg.burn_in = 500;
    cfg.thinning = 2;
    cfg.chains = 4;
    cfg.samples_per_chain = 1500;
    Rng rng(9, 2);
    const MhResult r = mh_sample(s, cfg, rng);
    CHECK(r.terminal.rows == 6000);
    CHECK(r.acceptance_rate > 0.3);
    CHECK(r.acceptance_rate < 1.0);

    double mean = 0.0, var = 0.0;
    sample_moments(r.terminal, mean, var);
    // Thinned MH still correlates, so allow a few times the i.i.d. error.
    const double se_mean = std::sqrt(post_var / 6000);
    CHECK(std::abs(mean - post_mean) < 5 * se_mean);
    CHECK(std::abs(var - post_var) < 5 * post_var * std::sqrt(2.0 / 6000));

    SUBCASE("trajectory rows pair up with the terminal") {
        REQUIRE(r.trajectory.size() == 2);
        // Identity transport: positions at t_0 and t_1 coincide.
        for (std::size_t i = 0; i < 20; ++i)
            CHECK(r.trajectory[0](i, 0) == r.terminal(i, 0));
    }
    SUBCASE("deterministic given equal generator state") {
        Rng r1(77, 5), r2(77, 5);
        const MhResult a = mh_sample(s, cfg, r1);
        const MhResult b = mh_sample(s, cfg, r2);
        CHECK(a.terminal.a == b.terminal.a);
        CHECK(a.acceptance_rate == b.acceptance_rate);
    }
    SUBCASE("seed choice shifts moments only within noise") {
        Rng r1(101, 1), r2(202, 2);
        const MhResult a = mh_sample(s, cfg, r1);
        const MhResult b = mh_sample(s, cfg, r2);
        double ma = 0.0, va = 0.0, mb = 0.0, vb = 0.0;
        sample_moments(a.terminal, ma, va);
        sample_moments(b.terminal, mb, vb);
        CHECK(std::abs(ma - mb) < 6 * se_mean);
    }
}

TEST_CASE("mh edge behavior") {
    SUBCASE("no observations accept everything") {
        FilterState s;
        s.sigma = 1.0;
        s.dim = 1;
        s.p0_sampler = gaussian_sampler(0.3, 1.0);
        s.p0_logdensity = gaussian_logdensity(0.3, 1.0);
        MhChainConfig cfg;
        cfg.burn_in = 10;
        cfg.thinning = 1;
        cfg.chains = 2;
        cfg.samples_per_chain = 3000;
        Rng rng(5, 5);
        const MhResult r = mh_sample(s, cfg, rng);
        CHECK(r.acceptance_rate == 1.0);
        double mean = 0.0, var = 0.0;
        sample_moments(r.terminal, mean, var);
        CHECK(std::abs(mean - 0.3) < 0.05);
        CHECK(std::abs(var - 1.0) < 0.06);
    }
    SUBCASE("uninformative observation reduces to the prior") {
        const FilterState s = identity_state(0.3, 1.0, -4.0, 1e6);
        MhChainConfig cfg;
        cfg.burn_in = 100;
        cfg.thinning = 1;
        cfg.chains = 2;
        cfg.samples_per_chain = 3000;
        Rng rng(6, 6);
        const MhResult r = mh_sample(s, cfg, rng);
        double mean = 0.0, var = 0.0;
        sample_moments(r.terminal, mean, var);
        CHECK(std::abs(mean - 0.3) < 0.05);
        CHECK(std::abs(var - 1.0) < 0.06);
    }
    SUBCASE("hopeless observation trips the window guard") {
        FilterState s = identity_state(0.0, 1.0, 0.0, 0.1);
        // Only the first draw agrees with the observation; every later
        // proposal is 50 sigmas out and can never be accepted.
        s.p0_sampler = [](Rng&, std::size_t n) {
            Mat x(n, 1, 50.0);
            x(0, 0) = 0.0;
            return x;
        };
        MhChainConfig cfg;
        cfg.burn_in = 0;
        cfg.thinning = 1;
        cfg.chains = 1;
        cfg.samples_per_chain = 1500;
        Rng rng(7, 7);
        CHECK_THROWS_AS(mh_sample(s, cfg, rng), DegenerateAcceptance);
    }
    SUBCASE("config validation") {
        const FilterState s = identity_state(0.0, 1.0, 0.0, 1.0);
        Rng rng(8, 8);
        MhChainConfig cfg;
        cfg.thinning = 0;
        CHECK_THROWS_AS(mh_sample(s, cfg, rng), InvalidArgument);
        cfg.thinning = 1;
        cfg.chains = 0;
        CHECK_THROWS_AS(mh_sample(s, cfg, rng), InvalidArgument);
    }
}

TEST_CASE("acceptance ratio equals the full density ratio") {
    // Real trained transport: one observed interval of two JKO substeps.
    const Potential phi = make_quadratic(Mat(1, 1, 0.8), Vec{0.3});
    FilterConfig fc;
    fc.sigma = 0.9;
    fc.obs_times = {0.2};
    fc.observations = Mat(1, 1, 1.4);
    fc.t_final = 0.2;
    fc.substeps = 2;
    fc.step.widths = {16, 16};
    fc.step.alpha = 0.05;
    fc.step.inv_beta = 0.7;
    fc.step.iters = 250;
    fc.step.batch = 256;
    fc.step.pretrain.tol = 5e-3;
    fc.train_pool = 2048;
    Rng rng(2024, 23);
    const FilterState s =
        run_filter(phi, gaussian_sampler(2.0, 0.25), gaussian_logdensity(2.0, 0.25), fc,
                   rng);
    REQUIRE(s.intervals.size() == 1);
    REQUIRE(s.intervals[0].chain.steps.size() == 2);

    // The same state with observations ignored gives the plain pushforward
    // density, so pred - push isolates the likelihood factor.
    FilterState blind = s;
    blind.intervals[0].observed = false;

    Rng pr(31, 3);
    const Mat starts = s.p0_sampler(pr, 8);
    for (std::size_t i = 0; i + 1 < starts.rows; i += 2) {
        Mat a(2, 1), b(2, 1);
        a(0, 0) = starts(i, 0);
        b(0, 0) = starts(i + 1, 0);
        Mat ta(1, 1, a(0, 0)), tb(1, 1, b(0, 0));
        push_through(s.intervals[0].chain, 2, ta);
        push_through(s.intervals[0].chain, 2, tb);
        a(1, 0) = ta(0, 0);
        b(1, 0) = tb(0, 0);

        const double lhs = std::log(filter_acceptance_ratio(s, a, b));
        const double rhs = (predictive_logdensity(s, a.row(1), 1) -
                            predictive_logdensity(blind, a.row(1), 1)) -
                           (predictive_logdensity(s, b.row(1), 1) -
                            predictive_logdensity(blind, b.row(1), 1));
        CHECK(lhs == doctest::Approx(rhs).epsilon(1e-8));
    }
}

TEST_CASE("filter with no observations is plain diffusion") {
    const Potential phi = make_quadratic(Mat(1, 1, 0.8), Vec{0.3});
    const Gaussian init(Vec{2.0}, Mat(1, 1, 0.25));
    FilterConfig fc;
    fc.sigma = 1.0;
    fc.t_final = 0.1;
    fc.substeps = 2;
    fc.step.widths = {16, 16};
    fc.step.alpha = 0.05;
    fc.step.inv_beta = 0.7;
    fc.step.iters = 900;
    fc.step.batch = 256;
    fc.step.pretrain.tol = 5e-3;
    fc.train_pool = 4096;
    Rng rng(2024, 29);
    const FilterState s = run_filter(phi, gaussian_sampler(2.0, 0.25),
                                     gaussian_logdensity(2.0, 0.25), fc, rng);
    REQUIRE(s.intervals.size() == 1);
    CHECK(!s.intervals[0].observed);
    CHECK(s.intervals[0].chain.h == doctest::Approx(0.05));

    MhChainConfig cfg;
    cfg.burn_in = 0;
    cfg.thinning = 1;
    cfg.chains = 2;
    cfg.samples_per_chain = 4000;
    Rng mhr(12, 4);
    const MhResult r = mh_sample(s, cfg, mhr);
    CHECK(r.acceptance_rate == 1.0);

    const Gaussian ref = ou_gaussian(std::get<QuadraticPotential>(phi), init, 0.7, 0.1);
    double mean = 0.0, var = 0.0;
    sample_moments(r.terminal, mean, var);
    CHECK(std::abs(mean - ref.mean()[0]) < 0.05);
    CHECK(std::abs(var - ref.cov()(0, 0)) < 0.05);

    SUBCASE("normalized predictive view integrates against the grid") {
        const Grid1D grid{-4.0, 7.0, 1100};
        const MeasureView pv = predictive_view(s, grid, cfg, "pred");
        double mass = 0.0;
        for (std::size_t j = 0; j < grid.cells; ++j) {
            const double c = grid.center(j);
            mass += std::exp(pv.logdensity(&c)) * grid.dx();
        }
        CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
        Rng vr(13, 5);
        const SymklResult sym = symkl_mc(pv, gaussian_view(ref, "ou"), 2000, vr);
        CHECK(sym.value < 0.05);
        CHECK(sym.value >= -3 * sym.std_error);
    }
}

TEST_CASE("run_filter validation") {
    const Potential phi = make_quadratic(Mat(1, 1, 1.0), Vec{0.0});
    const SamplerFn samp = gaussian_sampler(0.0, 1.0);
    const LogDensityFn logd = gaussian_logdensity(0.0, 1.0);
    Rng rng(1, 1);
    FilterConfig fc;
    fc.t_final = 0.0;
    CHECK_THROWS_AS(run_filter(phi, samp, logd, fc, rng), InvalidArgument);
    fc.t_final = 1.0;
    fc.obs_times = {0.5, 0.4};
    fc.observations = Mat(2, 1);
    CHECK_THROWS_AS(run_filter(phi, samp, logd, fc, rng), InvalidArgument);
    fc.obs_times = {0.5, 2.0};
    CHECK_THROWS_AS(run_filter(phi, samp, logd, fc, rng), InvalidArgument);
    fc.obs_times = {0.5};
    CHECK_THROWS_AS(run_filter(phi, samp, logd, fc, rng), DimensionMismatch);
    fc.observations = Mat(1, 1);
    fc.substeps = 0;
    CHECK_THROWS_AS(run_filter(phi, samp, logd, fc, rng), InvalidArgument);
}

}  // TEST_SUITE
