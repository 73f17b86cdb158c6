#include <doctest.h>

#include <cmath>

#include "wgf/errors.hpp"
#include "wgf/eval.hpp"

using namespace wgf;

namespace {

MeasureView gauss1(double mean, double var, std::string tag) {
    return gaussian_view(Gaussian(Vec{mean}, Mat(1, 1, var)), std::move(tag));
}

}  // namespace

TEST_SUITE("eval") {

TEST_CASE("identical views give exactly zero") {
    const MeasureView a = gauss1(0.7, 1.3, "a");
    const MeasureView b = gauss1(0.7, 1.3, "b");
    Rng rng(5, 1);
    const SymklResult r = symkl_mc(a, b, 500, rng);
    CHECK(r.value == 0.0);
    CHECK(r.std_error == 0.0);
    CHECK(r.ratio_p01 == 0.0);
    CHECK(r.ratio_p99 == 0.0);
    CHECK(r.n_samples == 500);
}

TEST_CASE("unit mean shift has symmetric kl one") {
    const MeasureView p = gauss1(0.0, 1.0, "p");
    const MeasureView q = gauss1(1.0, 1.0, "q");
    Rng rng(11, 2);
    const SymklResult r = symkl_mc(p, q, 10000, rng);
    CHECK(std::abs(r.value - 1.0) < 3 * r.std_error);
    CHECK(r.std_error < 0.05);
    CHECK(r.ratio_p01 < r.ratio_p99);

    SUBCASE("matches the closed form both ways") {
        const Gaussian g0(Vec{0.0}, Mat(1, 1, 1.0));
        const Gaussian g1(Vec{1.0}, Mat(1, 1, 1.0));
        CHECK(gaussian_kl(g0, g1) + gaussian_kl(g1, g0) == doctest::Approx(1.0));
    }
    SUBCASE("swapping the arguments agrees within noise") {
        Rng r1(21, 0), r2(21, 0);
        const SymklResult fwd = symkl_mc(p, q, 10000, r1);
        const SymklResult rev = symkl_mc(q, p, 10000, r2);
        CHECK(std::abs(fwd.value - rev.value) < 2 * (fwd.std_error + rev.std_error));
    }
}

TEST_CASE("estimate is nonnegative up to noise") {
    Rng rng(31, 3);
    for (int rep = 0; rep < 4; ++rep) {
        const MeasureView p = gauss1(rng.normal(), 0.5 + rng.uniform(), "p");
        const MeasureView q = gauss1(rng.normal(), 0.5 + rng.uniform(), "q");
        const SymklResult r = symkl_mc(p, q, 2000, rng);
        CHECK(r.value >= -3 * r.std_error);
    }
}

TEST_CASE("standard error halves when samples quadruple") {
    const MeasureView p = gauss1(0.0, 1.0, "p");
    const MeasureView q = gauss1(0.6, 1.4, "q");
    Rng rng(41, 4);
    const SymklResult small = symkl_mc(p, q, 10000, rng);
    const SymklResult big = symkl_mc(p, q, 40000, rng);
    CHECK(big.std_error < small.std_error);
    CHECK(std::abs(big.std_error / small.std_error - 0.5) < 0.3 * 0.5);
}

TEST_CASE("support mismatch names the offending sample") {
    Grid1D grid{-5.0, 5.0, 400};
    const Gaussian g(Vec{0.0}, Mat(1, 1, 1.0));
    const MeasureView gv =
        grid_view(grid, grid_project([&](double x) { return std::exp(g.logpdf(&x)); }, grid),
                  "boxed");
    MeasureView outside;
    outside.sampler = [](Rng&, std::size_t n) { return Mat(n, 1, 6.0); };
    outside.logdensity = [](const double*) { return 0.0; };
    outside.descriptor = "point-mass";
    Rng rng(51, 5);
    CHECK_THROWS_WITH_AS(symkl_mc(outside, gv, 100, rng),
                         doctest::Contains("point-mass"), NonFiniteLogRatio);
}

TEST_CASE("grid view agrees with the density it was projected from") {
    const Gaussian g(Vec{0.3}, Mat(1, 1, 0.64));
    Grid1D grid{-6.0, 6.0, 1500};
    const MeasureView gv =
        grid_view(grid, grid_project([&](double x) { return std::exp(g.logpdf(&x)); }, grid),
                  "grid");
    Rng rng(61, 6);

    SUBCASE("sampler has the right moments") {
        const Mat x = gv.sampler(rng, 20000);
        double m = 0.0, s2 = 0.0;
        for (const double v : x.a) m += v;
        m /= static_cast<double>(x.rows);
        for (const double v : x.a) s2 += (v - m) * (v - m);
        s2 /= static_cast<double>(x.rows);
        CHECK(std::abs(m - 0.3) < 0.02);
        CHECK(std::abs(s2 - 0.64) < 0.02);
    }
    SUBCASE("symmetric kl against the exact gaussian is tiny") {
        const SymklResult r = symkl_mc(gv, gaussian_view(g, "exact"), 10000, rng);
        CHECK(std::abs(r.value) < 0.01);
        CHECK(r.value >= -3 * r.std_error);
    }
    SUBCASE("degenerate inputs throw") {
        CHECK_THROWS_AS(grid_view(grid, Vec(7, 0.1), "bad"), DimensionMismatch);
        Vec neg(grid.cells, 0.1);
        neg[0] = -1.0;
        CHECK_THROWS_AS(grid_view(grid, neg, "bad"), NegativeDensity);
        CHECK_THROWS_AS(grid_view(grid, Vec(grid.cells, 0.0), "bad"), NegativeDensity);
    }
}

TEST_CASE("kde view samples its own smoothed density") {
    const Gaussian g(Vec{0.0, 0.0}, Mat::identity(2));
    Rng rng(71, 7);
    const MeasureView kv = kde_view(kde_fit(g.sample_n(rng, 2000)), "kde");
    const SymklResult self = symkl_mc(kv, kv, 2000, rng);
    CHECK(self.value == 0.0);
    const SymklResult vs = symkl_mc(kv, gaussian_view(g, "exact"), 4000, rng);
    CHECK(std::abs(vs.value) < 0.05);
}

TEST_CASE("chain view plugs the flow into the metric") {
    const Gaussian init(Vec{2.0}, Mat(1, 1, 0.25));
    const SamplerFn init_sampler = [init](Rng& r, std::size_t n) {
        return init.sample_n(r, n);
    };
    const LogDensityFn init_logdensity = [init](const double* x) {
        return init.logpdf(x);
    };

    SUBCASE("an empty chain is the initial measure") {
        const JkoChain chain;
        const MeasureView cv = chain_view(chain, init_sampler, init_logdensity, "flow");
        Rng rng(91, 9);
        const SymklResult r = symkl_mc(cv, gaussian_view(init, "init"), 1000, rng);
        CHECK(r.value == 0.0);
    }
    SUBCASE("two trained steps approach the ou marginal") {
        const Potential phi = make_quadratic(Mat(1, 1, 0.8), Vec{0.3});
        JkoRunConfig cfg;
        cfg.n_steps = 2;
        cfg.pool = 4096;
        cfg.step.widths = {16, 16};
        cfg.step.alpha = 0.05;
        cfg.step.h = 0.05;
        cfg.step.inv_beta = 0.7;
        cfg.step.iters = 900;
        cfg.step.batch = 256;
        cfg.step.pretrain.tol = 5e-3;
        Rng train_rng(2024, 17);
        const JkoChain chain = jko_run(init_sampler, &phi, cfg, train_rng);

        const Gaussian ref = ou_gaussian(std::get<QuadraticPotential>(phi), init,
                                         cfg.step.inv_beta, 0.1);
        const MeasureView cv = chain_view(chain, init_sampler, init_logdensity, "flow");
        Rng rng(92, 9);
        const SymklResult r = symkl_mc(cv, gaussian_view(ref, "ou"), 2000, rng);
        CHECK(r.value < 0.05);
        CHECK(r.value >= -3 * r.std_error);
    }
}

TEST_CASE("argument validation") {
    const MeasureView p = gauss1(0.0, 1.0, "p");
    Rng rng(81, 8);
    CHECK_THROWS_AS(symkl_mc(p, p, 99, rng), InvalidArgument);
    MeasureView hollow;
    hollow.descriptor = "hollow";
    CHECK_THROWS_AS(symkl_mc(hollow, p, 100, rng), InvalidArgument);
    MeasureView no_sampler;
    no_sampler.logdensity = [](const double*) { return 0.0; };
    CHECK_THROWS_AS(symkl_mc(p, no_sampler, 100, rng), InvalidArgument);
}

}  // TEST_SUITE
