#include "wgf/linalg.hpp"

#include <cmath>

#include "wgf/errors.hpp"
#include "wgf/kernels.hpp"

namespace wgf {

namespace {
constexpr std::size_t kMaxDim = 256;
constexpr double kSymTol = 1e-10;
}  // namespace

Cholesky chol(const Mat& h) {
    if (h.rows != h.cols) throw DimensionMismatch("chol: matrix not square");
    if (h.rows > kMaxDim) throw DimensionMismatch("chol: dimension exceeds 256");
    const std::size_t n = h.rows;
    Cholesky c;
    c.L = Mat(n, n);
    Mat& L = c.L;
    double logdet = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
        double d = h(j, j) - kernels::sqnorm(L.row(j), j);
        if (!(d > 0.0)) throw NotPositiveDefinite("chol: pivot <= 0 at index " +
                                                  std::to_string(j));
        const double ljj = std::sqrt(d);
        L(j, j) = ljj;
        logdet += std::log(ljj);
        const double inv = 1.0 / ljj;
        for (std::size_t i = j + 1; i < n; ++i) {
            const double s = h(i, j) - kernels::dot(L.row(i), L.row(j), j);
            L(i, j) = s * inv;
        }
    }
    c.logdet = 2.0 * logdet;
    return c;
}

double chol_logdet(const Mat& h) { return chol(h).logdet; }

void Cholesky::solve(Vec& b) const {
    const std::size_t n = dim();
    if (b.size() != n) throw DimensionMismatch("chol solve: length differs");
    // forward: L y = b
    for (std::size_t i = 0; i < n; ++i) {
        const double s = b[i] - kernels::dot(L.row(i), b.data(), i);
        b[i] = s / L(i, i);
    }
    // backward: L^T x = y
    for (std::size_t ii = n; ii-- > 0;) {
        double s = b[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= L(j, ii) * b[j];
        b[ii] = s / L(ii, ii);
    }
}

Vec Cholesky::solve_copy(const Vec& b) const {
    Vec x = b;
    solve(x);
    return x;
}

Mat Cholesky::inverse() const {
    const std::size_t n = dim();
    Mat inv(n, n);
    Vec e(n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        e.assign(n, 0.0);
        e[j] = 1.0;
        solve(e);
        for (std::size_t i = 0; i < n; ++i) inv(i, j) = e[i];
    }
    symmetrize(inv);
    return inv;
}

SymEig sym_eig(const Mat& a) {
    if (a.rows != a.cols) throw DimensionMismatch("sym_eig: matrix not square");
    if (a.rows > kMaxDim) throw DimensionMismatch("sym_eig: dimension exceeds 256");
    if (max_asymmetry(a) > kSymTol)
        throw NotSymmetric("sym_eig: asymmetry exceeds 1e-10");

    const std::size_t n = a.rows;
    Mat d = a;
    symmetrize(d);
    Mat v = Mat::identity(n);

    // Cyclic Jacobi sweeps; terminates when all off-diagonal mass is gone at
    // double precision. Quadratic convergence makes ~8 sweeps plenty even at
    // dim 256.
    for (int sweep = 0; sweep < 64; ++sweep) {
        double off = 0.0;
        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) off += d(p, q) * d(p, q);
        if (off < 1e-300) break;
        bool rotated = false;
        for (std::size_t p = 0; p < n; ++p) {
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = d(p, q);
                const double scale = std::fabs(d(p, p)) + std::fabs(d(q, q));
                if (std::fabs(apq) <= 1e-18 * scale || apq == 0.0) continue;
                rotated = true;
                const double theta = (d(q, q) - d(p, p)) / (2.0 * apq);
                const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
                const double c = 1.0 / std::sqrt(t * t + 1.0);
                const double s = t * c;
                const double tau = s / (1.0 + c);
                const double dpp = d(p, p), dqq = d(q, q);
                d(p, p) = dpp - t * apq;
                d(q, q) = dqq + t * apq;
                d(p, q) = 0.0;
                d(q, p) = 0.0;
                for (std::size_t i = 0; i < n; ++i) {
                    if (i != p && i != q) {
                        const double dip = d(i, p), diq = d(i, q);
                        d(i, p) = dip - s * (diq + tau * dip);
                        d(i, q) = diq + s * (dip - tau * diq);
                        d(p, i) = d(i, p);
                        d(q, i) = d(i, q);
                    }
                    const double vip = v(i, p), viq = v(i, q);
                    v(i, p) = vip - s * (viq + tau * vip);
                    v(i, q) = viq + s * (vip - tau * viq);
                }
            }
        }
        if (!rotated) break;
    }

    SymEig out;
    out.values.resize(n);
    for (std::size_t i = 0; i < n; ++i) out.values[i] = d(i, i);
    out.vectors = std::move(v);
    return out;
}

namespace {

// V f(lambda) V^T for an elementwise spectral function.
template <typename F>
Mat spectral_apply(const Mat& a, F&& f) {
    const SymEig e = sym_eig(a);
    const std::size_t n = a.rows;
    Mat scaled(n, n);  // V diag(f)
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) scaled(i, j) = e.vectors(i, j) * f(e.values[j]);
    Mat out(n, n);
    kernels::gemm_nt(n, n, n, scaled.data(), e.vectors.data(), out.data(), false);
    symmetrize(out);
    return out;
}

}  // namespace

Mat sym_expm(const Mat& a, double t) {
    return spectral_apply(a, [t](double lam) { return std::exp(-lam * t); });
}

Mat spd_inverse(const Mat& a) { return chol(a).inverse(); }

Mat sym_sqrt(const Mat& a) {
    return spectral_apply(a, [](double lam) {
        if (lam < -1e-12) throw NotPositiveDefinite("sym_sqrt: negative eigenvalue");
        return std::sqrt(std::fmax(lam, 0.0));
    });
}

}  // namespace wgf
