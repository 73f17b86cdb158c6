#include <doctest.h>

#include <cmath>

#include "wgf/baselines.hpp"
#include "wgf/errors.hpp"
#include "wgf/measures.hpp"
#include "wgf/potential.hpp"

using namespace wgf;

TEST_SUITE("baselines") {

TEST_CASE("euler-maruyama tracks the ou moments") {
    const Potential phi = make_quadratic(Mat(1, 1, 0.8), Vec{0.3});
    const Gaussian init(Vec{2.0}, Mat(1, 1, 0.25));
    const double inv_beta = 0.7;
    Rng rng(71, 4);
    Mat x = init.sample_n(rng, 20000);
    x = em_simulate(phi, std::move(x), inv_beta, 1e-3, 500, rng);

    double m = 0.0, s2 = 0.0;
    for (const double v : x.a) m += v;
    m /= static_cast<double>(x.rows);
    for (const double v : x.a) s2 += (v - m) * (v - m);
    s2 /= static_cast<double>(x.rows);

    const Gaussian ref =
        ou_gaussian(std::get<QuadraticPotential>(phi), init, inv_beta, 0.5);
    CHECK(std::abs(m - ref.mean()[0]) < 0.02);
    CHECK(std::abs(s2 - ref.cov()(0, 0)) < 0.02);
}

TEST_CASE("euler-maruyama edge cases") {
    const Potential phi = make_quadratic(Mat(1, 1, 1.0), Vec{0.0});
    Rng rng(1, 1);
    SUBCASE("bad dt") {
        CHECK_THROWS_AS(em_simulate(phi, Mat(4, 1, 1.0), 1.0, 0.0, 10, rng),
                        InvalidArgument);
    }
    SUBCASE("zero steps leave the state untouched") {
        const Mat out = em_simulate(phi, Mat(4, 1, 2.0), 1.0, 0.1, 0, rng);
        for (const double v : out.a) CHECK(v == 2.0);
    }
    SUBCASE("zero temperature is plain gradient descent") {
        const Mat out = em_simulate(phi, Mat(1, 1, 2.0), 0.0, 0.1, 1, rng);
        CHECK(out(0, 0) == doctest::Approx(1.8).epsilon(1e-15));
    }
}

TEST_CASE("kde recovers a gaussian density") {
    const Gaussian g(Vec{0.0}, Mat(1, 1, 1.0));
    Rng rng(42, 6);
    const Kde kde = kde_fit(g.sample_n(rng, 4000));
    for (const double x : {-2.0, -1.0, 0.0, 0.5, 1.0, 2.0}) {
        CHECK(std::abs(kde_logpdf(kde, &x) - g.logpdf(&x)) < 0.1);
    }
    SUBCASE("far point stays finite") {
        const double far = 50.0;
        const double lp = kde_logpdf(kde, &far);
        CHECK(std::isfinite(lp));
        CHECK(lp < -100.0);
    }
}

TEST_CASE("kde integrates to one in two dimensions") {
    const Gaussian g(Vec{0.0, 0.0}, Mat::identity(2));
    Rng rng(17, 9);
    const Kde kde = kde_fit(g.sample_n(rng, 500));
    const double lo = -5.0, step = 0.05;
    const std::size_t n = 200;
    double mass = 0.0;
    Vec pt(2);
    for (std::size_t i = 0; i < n; ++i) {
        pt[0] = lo + step * (static_cast<double>(i) + 0.5);
        for (std::size_t j = 0; j < n; ++j) {
            pt[1] = lo + step * (static_cast<double>(j) + 0.5);
            mass += std::exp(kde_logpdf(kde, pt.data()));
        }
    }
    mass *= step * step;
    CHECK(mass == doctest::Approx(1.0).epsilon(5e-3));
}

TEST_CASE("kde rejects degenerate spreads") {
    CHECK_THROWS_AS(kde_fit(Mat(10, 1, 3.0)), SingularBandwidth);
    CHECK_THROWS_AS(kde_fit(Mat(1, 2)), SingularBandwidth);
    Mat line(50, 2);
    for (std::size_t i = 0; i < line.rows; ++i) {
        line(i, 0) = 0.1 * static_cast<double>(i);
        line(i, 1) = line(i, 0);  // rank-one covariance
    }
    CHECK_THROWS_AS(kde_fit(std::move(line)), SingularBandwidth);
}

TEST_CASE("bernoulli flux weight") {
    CHECK(cc_bernoulli(0.0) == 1.0);
    // Series and closed form agree where the branch switches.
    const double w0 = 1.01e-8;
    CHECK(std::abs(cc_bernoulli(w0) - (1.0 - w0 / 2 + w0 * w0 / 12)) < 1e-14);
    for (const double w : {0.3, 2.0, 10.0}) {
        CHECK(cc_bernoulli(w) / cc_bernoulli(-w) ==
              doctest::Approx(std::exp(-w)).epsilon(1e-12));
    }
    CHECK(cc_bernoulli(-40.0) == doctest::Approx(40.0).epsilon(1e-12));
    CHECK(cc_bernoulli(40.0) > 0.0);
    CHECK(cc_bernoulli(40.0) < 1e-15);
}

TEST_CASE("boltzmann density is a discrete fixed point") {
    const Potential phi{Sinusoid1DPotential{}};
    const Grid1D grid{-5.0, 5.0, 800};
    const Vec pi = grid_project(
        [&](double x) { return std::exp(-potential_value(phi, &x, 1, nullptr)); }, grid);
    Vec rho = pi;
    chang_cooper_evolve(phi, 1.0, grid, rho, 1e-3, 2000);
    double dev = 0.0;
    for (std::size_t j = 0; j < rho.size(); ++j) dev = std::max(dev, std::abs(rho[j] - pi[j]));
    CHECK(dev < 1e-12);
    CHECK(std::abs(grid_mass(rho, grid) - 1.0) < 1e-12);
    for (const double v : rho) CHECK(v >= 0.0);
}

TEST_CASE("uniform start relaxes to the boltzmann density") {
    const Potential phi{Sinusoid1DPotential{}};
    const Grid1D grid{-5.0, 5.0, 800};
    const Vec pi = grid_project(
        [&](double x) { return std::exp(-potential_value(phi, &x, 1, nullptr)); }, grid);
    Vec rho = grid_project([](double) { return 1.0; }, grid);
    chang_cooper_evolve(phi, 1.0, grid, rho, 2e-3, 3000);
    double l1 = 0.0;
    for (std::size_t j = 0; j < rho.size(); ++j) l1 += std::abs(rho[j] - pi[j]);
    l1 *= grid.dx();
    CHECK(l1 < 5e-3);
    CHECK(std::abs(grid_mass(rho, grid) - 1.0) < 1e-12);
}

TEST_CASE("chang-cooper matches the ou marginal") {
    const Potential phi = make_quadratic(Mat(1, 1, 0.8), Vec{0.3});
    const Gaussian init(Vec{2.0}, Mat(1, 1, 0.25));
    const double inv_beta = 0.7;
    const Grid1D grid{-6.0, 6.0, 1200};
    Vec rho = grid_project([&](double x) { return std::exp(init.logpdf(&x)); }, grid);
    chang_cooper_evolve(phi, inv_beta, grid, rho, 1e-4, 5000);

    double mean = 0.0, var = 0.0;
    grid_moments(rho, grid, mean, var);
    const Gaussian ref =
        ou_gaussian(std::get<QuadraticPotential>(phi), init, inv_beta, 0.5);
    CHECK(std::abs(mean - ref.mean()[0]) < 1e-3);
    CHECK(std::abs(var - ref.cov()(0, 0)) < 1e-3);
}

TEST_CASE("chang-cooper validation") {
    const Potential phi{Sinusoid1DPotential{}};
    const Grid1D grid{-5.0, 5.0, 100};
    Vec rho(100, 0.1);
    CHECK_THROWS_AS(chang_cooper_evolve(phi, 1.0, grid, rho, 0.0, 1), InvalidArgument);
    CHECK_THROWS_AS(chang_cooper_evolve(phi, 0.0, grid, rho, 1e-3, 1), InvalidArgument);
    Vec wrong(99, 0.1);
    CHECK_THROWS_AS(chang_cooper_evolve(phi, 1.0, grid, wrong, 1e-3, 1),
                    DimensionMismatch);
    Vec neg(100, 0.1);
    neg[3] = -0.2;
    CHECK_THROWS_AS(chang_cooper_evolve(phi, 1.0, grid, neg, 1e-3, 1), NegativeDensity);
    CHECK_THROWS_AS(grid_project([](double x) { return x; }, grid), NegativeDensity);
}

}  // TEST_SUITE
