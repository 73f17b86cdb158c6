#include "wgf/measures.hpp"

#include <cmath>
#include <utility>

#include "wgf/errors.hpp"
#include "wgf/kernels.hpp"

namespace wgf {

namespace {
constexpr double kLog2Pi = 1.8378770664093453;

Mat checked_cov(Mat cov, std::size_t dim) {
    if (dim == 0) throw InvalidArgument("gaussian: empty mean");
    if (cov.rows != dim || cov.cols != dim)
        throw DimensionMismatch("gaussian: covariance shape does not match mean");
    if (max_asymmetry(cov) > 1e-10) throw NotSymmetric("gaussian: covariance");
    symmetrize(cov);
    return cov;
}
}  // namespace

Gaussian::Gaussian(Vec mean, Mat cov)
    : mean_(std::move(mean)),
      cov_(checked_cov(std::move(cov), mean_.size())),
      chol_(chol(cov_)) {}

void Gaussian::sample(Rng& rng, double* out) const {
    const std::size_t d = dim();
    Vec z = rng.normal_vec(d);
    for (std::size_t i = 0; i < d; ++i) {
        double acc = mean_[i];
        const double* lrow = chol_.L.row(i);
        for (std::size_t j = 0; j <= i; ++j) acc += lrow[j] * z[j];
        out[i] = acc;
    }
}

Mat Gaussian::sample_n(Rng& rng, std::size_t n) const {
    Mat out(n, dim());
    for (std::size_t i = 0; i < n; ++i) sample(rng, out.row(i));
    return out;
}

double Gaussian::logpdf(const double* x) const {
    const std::size_t d = dim();
    Vec v(d);
    for (std::size_t i = 0; i < d; ++i) v[i] = x[i] - mean_[i];
    Vec y = chol_.solve_copy(v);
    const double quad = kernels::dot(v.data(), y.data(), d);
    return -0.5 * (static_cast<double>(d) * kLog2Pi + chol_.logdet + quad);
}

double Gaussian::entropy() const {
    return 0.5 * static_cast<double>(dim()) * (1.0 + kLog2Pi) + 0.5 * chol_.logdet;
}

double gaussian_kl(const Gaussian& p0, const Gaussian& p1) {
    const std::size_t d = p0.dim();
    if (p1.dim() != d) throw DimensionMismatch("gaussian_kl: dimension mismatch");
    const Mat prec1 = spd_inverse(p1.cov());
    double trace = 0.0;
    for (std::size_t i = 0; i < d; ++i)
        trace += kernels::dot(prec1.row(i), p0.cov().row(i), d);
    Vec dm(d);
    for (std::size_t i = 0; i < d; ++i) dm[i] = p1.mean()[i] - p0.mean()[i];
    const Vec pd = matvec(prec1, dm);
    const double quad = kernels::dot(dm.data(), pd.data(), d);
    return 0.5 * (trace + quad - static_cast<double>(d) + p1.logdet_cov() -
                  p0.logdet_cov());
}

Mat mixture_sample_n(const GaussianMixturePotential& p, Rng& rng, std::size_t n) {
    if (p.means.empty()) throw InvalidArgument("mixture: no components");
    const std::size_t d = p.means[0].size();
    Mat out(n, d);
    for (std::size_t i = 0; i < n; ++i) {
        const Vec& mu = p.means[rng.uniform_index(p.means.size())];
        double* row = out.row(i);
        for (std::size_t j = 0; j < d; ++j) row[j] = mu[j] + rng.normal();
    }
    return out;
}

Gaussian stationary_gaussian(const QuadraticPotential& q, double inv_beta) {
    if (!(inv_beta > 0.0)) throw InvalidArgument("stationary_gaussian: inv_beta <= 0");
    Mat cov = spd_inverse(q.A);
    for (auto& v : cov.a) v *= inv_beta;
    return Gaussian(q.b, std::move(cov));
}

Gaussian ou_gaussian(const QuadraticPotential& q, const Gaussian& init,
                     double inv_beta, double t) {
    const std::size_t d = q.b.size();
    if (init.dim() != d) throw DimensionMismatch("ou_gaussian: dimension mismatch");
    if (!(inv_beta > 0.0)) throw InvalidArgument("ou_gaussian: inv_beta <= 0");
    if (t < 0.0) throw InvalidArgument("ou_gaussian: negative time");

    const Mat E = sym_expm(q.A, t);        // e^{-At}
    const Mat E2 = sym_expm(q.A, 2.0 * t); // e^{-2At}
    Vec mu(d);
    for (std::size_t i = 0; i < d; ++i) mu[i] = init.mean()[i] - q.b[i];
    mu = matvec(E, mu);
    for (std::size_t i = 0; i < d; ++i) mu[i] += q.b[i];

    Mat cov = matmul(matmul(E, init.cov()), E);
    const Mat ainv = spd_inverse(q.A);
    // A^-1 and e^{-2At} commute (same eigenbasis); the product is symmetric.
    Mat tail = matmul(ainv, E2);
    for (std::size_t i = 0; i < cov.size(); ++i)
        cov.a[i] += inv_beta * (ainv.a[i] - tail.a[i]);
    symmetrize(cov);
    return Gaussian(std::move(mu), std::move(cov));
}

}  // namespace wgf
