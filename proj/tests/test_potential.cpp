#include <doctest.h>

#include <cmath>
#include <memory>
#include <vector>

#include "wgf/dataset.hpp"
#include "wgf/errors.hpp"
#include "wgf/potential.hpp"
#include "wgf/rng.hpp"

using namespace wgf;

namespace {

// Central differences of the potential value.
Vec fd_grad(const Potential& p, Vec x, double eps) {
    Vec out(x.size());
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double save = x[d];
        x[d] = save + eps;
        const double up = potential_value(p, x.data(), x.size(), nullptr);
        x[d] = save - eps;
        const double dn = potential_value(p, x.data(), x.size(), nullptr);
        x[d] = save;
        out[d] = (up - dn) / (2.0 * eps);
    }
    return out;
}

void grad_matches_fd(const Potential& p, const Vec& x, double tol) {
    Vec grad(x.size());
    potential_value_grad(p, x.data(), x.size(), grad.data(), nullptr);
    const Vec fd = fd_grad(p, x, 1e-6);
    for (std::size_t d = 0; d < x.size(); ++d) {
        const double scale = 1.0 + std::max(std::fabs(grad[d]), std::fabs(fd[d]));
        CHECK(std::fabs(grad[d] - fd[d]) <= tol * scale);
    }
}

// Two informative columns plus the constant bias column the parser appends.
std::shared_ptr<LabeledDataset> toy_dataset() {
    auto ds = std::make_shared<LabeledDataset>();
    ds->features = Mat(6, 3);
    const double feat[6][2] = {{0.5, -1.0}, {1.5, 0.25}, {-0.75, 2.0},
                               {0.0, -0.5}, {2.0, 1.0},  {-1.25, -1.5}};
    const int lab[6] = {1, -1, 1, -1, 1, -1};
    for (std::size_t i = 0; i < 6; ++i) {
        ds->features(i, 0) = feat[i][0];
        ds->features(i, 1) = feat[i][1];
        ds->features(i, 2) = 1.0;
        ds->labels.push_back(lab[i]);
    }
    return ds;
}

}  // namespace

TEST_SUITE("potential") {

TEST_CASE("quadratic value and gradient") {
    Mat a(2, 2);
    a(0, 0) = 2.0;
    a(1, 1) = 1.0;
    a(0, 1) = a(1, 0) = 0.3;
    const Potential p = make_quadratic(a, {1.0, -1.0});

    // x - b = (1, 1): 0.5 * (2 + 0.3 + 0.3 + 1) = 1.8
    const Vec x = {2.0, 0.0};
    CHECK(potential_value(p, x.data(), 2, nullptr) == doctest::Approx(1.8).epsilon(1e-14));

    Vec grad(2);
    potential_value_grad(p, x.data(), 2, grad.data(), nullptr);
    CHECK(grad[0] == doctest::Approx(2.3).epsilon(1e-14));  // A (x-b) row 0
    CHECK(grad[1] == doctest::Approx(1.3).epsilon(1e-14));
    grad_matches_fd(p, {0.3, -1.7}, 1e-8);
}

TEST_CASE("quadratic construction rejects bad matrices") {
    Mat asym(2, 2);
    asym(0, 1) = 0.5;
    CHECK_THROWS_AS(make_quadratic(asym, {0.0, 0.0}), NotSymmetric);

    Mat indef(2, 2);
    indef(0, 0) = 1.0;
    indef(1, 1) = -1.0;
    CHECK_THROWS_AS(make_quadratic(indef, {0.0, 0.0}), NotPositiveDefinite);

    Mat ok = Mat::identity(2);
    CHECK_THROWS_AS(make_quadratic(ok, {0.0, 0.0, 0.0}), DimensionMismatch);
}

TEST_CASE("mixture density and potential") {
    GaussianMixturePotential mix;
    mix.means = {{-2.0}, {2.0}};
    mix.inv_beta = 0.7;

    // Hand log density at x = 0: log(0.5 phi(2) + 0.5 phi(2)) = log phi(2).
    const double x0 = 0.0;
    const double expect = -0.5 * std::log(2.0 * M_PI) - 2.0;
    CHECK(mixture_logdensity(mix, &x0, 1) == doctest::Approx(expect).epsilon(1e-12));

    const Potential p = mix;
    CHECK(potential_value(p, &x0, 1, nullptr) ==
          doctest::Approx(-0.7 * expect).epsilon(1e-12));
    grad_matches_fd(p, {0.6}, 1e-8);
    grad_matches_fd(p, {-2.4}, 1e-8);

    // Z == 1 by construction: trapezoid quadrature over the 1-D density.
    double z = 0.0;
    const double lo = -12.0, hi = 12.0, dx = 1e-3;
    for (double x = lo; x < hi; x += dx) {
        const double xm = x + 0.5 * dx;
        z += dx * std::exp(mixture_logdensity(mix, &xm, 1));
    }
    CHECK(z == doctest::Approx(1.0).epsilon(1e-6));
}

TEST_CASE("random mixture stays inside its box") {
    Rng rng(5);
    const auto mix = random_mixture(3, 7, 10.0, 1.0, rng);
    CHECK(mix.means.size() == 7);
    for (const auto& m : mix.means) {
        CHECK(m.size() == 3);
        for (double v : m) {
            CHECK(v >= -5.0);
            CHECK(v <= 5.0);
        }
    }
}

TEST_CASE("sinusoid values and slope") {
    const Potential p = Sinusoid1DPotential{};
    const double x0 = 0.0;
    CHECK(potential_value(p, &x0, 1, nullptr) == doctest::Approx(0.0));
    const double x1 = 0.25;
    CHECK(potential_value(p, &x1, 1, nullptr) ==
          doctest::Approx(1.0 / M_PI + 1.0 / 64.0).epsilon(1e-12));
    grad_matches_fd(p, {0.37}, 1e-8);
    grad_matches_fd(p, {-1.9}, 1e-8);
}

TEST_CASE("logistic posterior gradient matches finite differences") {
    LogisticPosteriorPotential lp;
    lp.data = toy_dataset();
    lp.inv_beta = 0.5;
    const Potential p = lp;
    // x = [w0, w1, w_bias, lambda]
    grad_matches_fd(p, {0.3, -0.2, 0.1, -0.4}, 1e-7);
    grad_matches_fd(p, {-1.0, 0.8, -0.3, 1.2}, 1e-7);
}

TEST_CASE("logistic likelihood term is the log sigmoid of the margin") {
    auto six = toy_dataset();
    auto five = std::make_shared<LabeledDataset>();
    five->features = Mat(5, 3);
    for (std::size_t i = 0; i < 5; ++i) {
        for (std::size_t j = 0; j < 3; ++j)
            five->features(i, j) = six->features(i, j);
        five->labels.push_back(six->labels[i]);
    }
    LogisticPosteriorPotential a{six, 0, 1.0}, b{five, 0, 1.0};

    const Vec x = {0.4, -0.6, 0.2, 0.3};
    // Row 5: f = (-1.25, -1.5, 1), y = -1. margin = w.f with the bias inside f.
    const double margin = 0.4 * -1.25 + -0.6 * -1.5 + 0.2 * 1.0;
    const double ll = -std::log1p(std::exp(-(-1.0) * margin));
    const double diff = potential_value(Potential(a), x.data(), 4, nullptr) -
                        potential_value(Potential(b), x.data(), 4, nullptr);
    CHECK(diff == doctest::Approx(-ll).epsilon(1e-12));
}

TEST_CASE("minibatch estimator averages to the full objective") {
    LogisticPosteriorPotential lp;
    lp.data = toy_dataset();
    lp.minibatch = 2;
    lp.inv_beta = 1.0;

    const Vec x = {0.25, -0.5, 0.4, 0.1};
    const double full = potential_value(Potential(lp), x.data(), 4, nullptr);

    // Every 2-subset of the 6 rows, equally weighted.
    double acc = 0.0;
    std::size_t count = 0;
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = i + 1; j < 6; ++j) {
            acc += logistic_value_with_batch(lp, x.data(), 4, {i, j});
            ++count;
        }
    CHECK(count == 15);
    CHECK(acc / 15.0 == doctest::Approx(full).epsilon(1e-12));
}

TEST_CASE("minibatch draws are deterministic given the stream") {
    LogisticPosteriorPotential lp;
    lp.data = toy_dataset();
    lp.minibatch = 3;
    const Potential p = lp;
    const Vec x = {0.1, 0.2, -0.3, 0.0};

    Rng r1(99), r2(99);
    const double a = potential_value(p, x.data(), 4, &r1);
    const double b = potential_value(p, x.data(), 4, &r2);
    CHECK(a == b);
    // Without an rng the full batch is used; generally a different value.
    const double full = potential_value(p, x.data(), 4, nullptr);
    CHECK(std::isfinite(full));
}

TEST_CASE("model dimensions") {
    Mat a = Mat::identity(3);
    CHECK(potential_dim(make_quadratic(a, {0, 0, 0})) == 3);

    GaussianMixturePotential mix;
    mix.means = {{0.0, 0.0}};
    CHECK(potential_dim(Potential(mix)) == 2);

    LogisticPosteriorPotential lp;
    lp.data = toy_dataset();
    CHECK(potential_dim(Potential(lp)) == 4);  // 3 feature cols (bias last) + lambda

    CHECK(potential_dim(Potential(Sinusoid1DPotential{})) == 1);
    CHECK(potential_dim(Potential(ZeroPotential{})) == 0);

    const Vec bad = {1.0, 2.0};
    CHECK_THROWS_AS(potential_value(Potential(Sinusoid1DPotential{}), bad.data(), 2, nullptr),
                    DimensionMismatch);
}

TEST_CASE("zero potential") {
    const Potential p = ZeroPotential{};
    const Vec x = {3.0, -1.0};
    Vec grad(2, 99.0);
    CHECK(potential_value_grad(p, x.data(), 2, grad.data(), nullptr) == 0.0);
    CHECK(grad[0] == 0.0);
    CHECK(grad[1] == 0.0);
}

}  // TEST_SUITE
