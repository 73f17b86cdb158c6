#include "wgf/icnn.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>

#include "wgf/activations.hpp"
#include "wgf/errors.hpp"
#include "wgf/kernels.hpp"

namespace wgf {

namespace {

void check_shapes(const IcnnParams& p) {
    const std::size_t L = p.widths.size();
    if (p.dim == 0 || L == 0) throw InvalidArgument("icnn: empty architecture");
    if (!(p.alpha > 0.0)) throw InvalidArgument("icnn: alpha must be positive");
    for (auto w : p.widths)
        if (w == 0) throw InvalidArgument("icnn: zero-width layer");
    if (p.A.size() != L || p.b.size() != L || p.W.size() != L - 1 ||
        p.w_out.size() != p.widths[L - 1])
        throw InvalidArgument("icnn: tensor count does not match widths");
}

void check_batch(const IcnnParams& p, const Mat& X) {
    if (X.cols != p.dim) throw DimensionMismatch("icnn: batch column count != dim");
    if (X.rows == 0) throw InvalidArgument("icnn: empty batch");
}

// Visits tensors in the flat order A_0, b_0, .., A_{L-1}, b_{L-1}, W_*, w_out.
// Works for IcnnParams and IcnnGrads (same field names).
template <typename T, typename F>
void walk_tensors(T& t, F&& f) {
    const std::size_t L = t.A.size();
    for (std::size_t l = 0; l < L; ++l) {
        f(t.A[l].data(), t.A[l].size());
        f(t.b[l].data(), t.b[l].size());
    }
    for (auto& w : t.W) f(w.data(), w.size());
    f(t.w_out.data(), t.w_out.size());
}

std::size_t max_width(const IcnnParams& p) {
    return *std::max_element(p.widths.begin(), p.widths.end());
}

void shape(Mat& m, std::size_t r, std::size_t c) {
    if (m.rows != r || m.cols != c) m = Mat(r, c);
}

// dst = src with column i scaled by c[i].
void colscale_into(const Mat& src, const double* c, Mat& dst) {
    shape(dst, src.rows, src.cols);
    const std::size_t w = src.cols;
    for (std::size_t d = 0; d < src.rows; ++d) {
        const double* in = src.row(d);
        double* out = dst.row(d);
        for (std::size_t i = 0; i < w; ++i) out[i] = in[i] * c[i];
    }
}

// out[i] += sum_d a(d,i) * b(d,i); out has the common column count.
void coldot_acc(const double* a, const double* b, std::size_t rows, std::size_t w,
                double* out) {
    for (std::size_t d = 0; d < rows; ++d) {
        const double* ar = a + d * w;
        const double* br = b + d * w;
        for (std::size_t i = 0; i < w; ++i) out[i] += ar[i] * br[i];
    }
}

// Batched activation ladders, one row per sample. T (third derivative) only
// materializes for the entropy term's backward pass.
struct BatchLadder {
    std::vector<Mat> Z, S, Q, T;
};

void batch_forward(const IcnnParams& p, const Mat& X, bool third, BatchLadder& lad) {
    const std::size_t L = p.layers(), N = X.rows, D = p.dim;
    lad.Z.resize(L);
    lad.S.resize(L);
    lad.Q.resize(L);
    lad.T.resize(third ? L : 0);
    Mat U;
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t wl = p.widths[l];
        shape(U, N, wl);
        if (l == 0) {
            kernels::gemm_nt(N, wl, D, X.data(), p.A[0].data(), U.data(), false);
        } else {
            kernels::gemm_nt(N, wl, p.widths[l - 1], lad.Z[l - 1].data(),
                             p.W[l - 1].data(), U.data(), false);
            kernels::gemm_nt(N, wl, D, X.data(), p.A[l].data(), U.data(), true);
        }
        for (std::size_t n = 0; n < N; ++n)
            kernels::axpy(1.0, p.b[l].data(), U.row(n), wl);
        shape(lad.Z[l], N, wl);
        shape(lad.S[l], N, wl);
        shape(lad.Q[l], N, wl);
        if (third) shape(lad.T[l], N, wl);
        softplus_ladder_fill(U.data(), N * wl, lad.Z[l].data(), lad.S[l].data(),
                             lad.Q[l].data(), third ? lad.T[l].data() : nullptr);
    }
}

// G.row(n) = grad psi(X.row(n)) by reverse accumulation over the whole batch:
//   Vbar_{L-1} = S_{L-1} * w_out,  Vbar_l = (Vbar_{l+1} W_l) * S_l,
//   G = alpha X + sum_l Vbar_l A_l.
void push_from_ladder(const IcnnParams& p, const Mat& X, const BatchLadder& lad,
                      Mat& G) {
    const std::size_t L = p.layers(), N = X.rows, D = p.dim;
    shape(G, N, D);
    for (std::size_t i = 0; i < N * D; ++i) G.a[i] = p.alpha * X.a[i];

    Mat Vb(N, p.widths[L - 1]);
    for (std::size_t n = 0; n < N; ++n) {
        const double* s = lad.S[L - 1].row(n);
        double* v = Vb.row(n);
        for (std::size_t i = 0; i < p.widths[L - 1]; ++i) v[i] = s[i] * p.w_out[i];
    }
    Mat next;
    for (std::size_t l = L; l-- > 0;) {
        kernels::gemm_nn(N, D, p.widths[l], Vb.data(), p.A[l].data(), G.data(), true);
        if (l == 0) break;
        shape(next, N, p.widths[l - 1]);
        kernels::gemm_nn(N, p.widths[l - 1], p.widths[l], Vb.data(),
                         p.W[l - 1].data(), next.data(), false);
        for (std::size_t i = 0; i < next.size(); ++i) next.a[i] *= lad.S[l - 1].a[i];
        std::swap(Vb, next);
    }
}

// Per-sample transposed Jacobian ladder: Mt_l = (d u_l / d x)^T, dim x w_l,
//   Mt_0 = A_0^T,  Jt_l = Mt_l colscale s_l,  Mt_{l+1} = Jt_l W_l^T + A_{l+1}^T.
// Jt is filled for l < L-1 (all the recurrence consumes).
void build_mt(const IcnnParams& p, const std::vector<const double*>& s,
              std::vector<Mat>& Mt, std::vector<Mat>& Jt) {
    const std::size_t L = p.layers(), D = p.dim;
    shape(Mt[0], D, p.widths[0]);
    for (std::size_t i = 0; i < p.widths[0]; ++i) {
        const double* arow = p.A[0].row(i);
        for (std::size_t d = 0; d < D; ++d) Mt[0](d, i) = arow[d];
    }
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const std::size_t wn = p.widths[l + 1];
        colscale_into(Mt[l], s[l], Jt[l]);
        shape(Mt[l + 1], D, wn);
        kernels::gemm_nt(D, wn, p.widths[l], Jt[l].data(), p.W[l].data(),
                         Mt[l + 1].data(), false);
        for (std::size_t i = 0; i < wn; ++i) {
            const double* arow = p.A[l + 1].row(i);
            for (std::size_t d = 0; d < D; ++d) Mt[l + 1](d, i) += arow[d];
        }
    }
}

// beta_l = d psi / d z_l: beta_{L-1} = w_out, beta_{l-1} = W_{l-1}^T (beta_l * s_l).
void build_beta(const IcnnParams& p, const std::vector<const double*>& s,
                std::vector<Vec>& beta, Vec& tmp) {
    const std::size_t L = p.layers();
    beta[L - 1] = p.w_out;
    for (std::size_t l = L - 1; l > 0; --l) {
        const std::size_t wl = p.widths[l];
        for (std::size_t i = 0; i < wl; ++i) tmp[i] = beta[l][i] * s[l][i];
        beta[l - 1].resize(p.widths[l - 1]);
        kernels::gemv_t(wl, p.widths[l - 1], p.W[l - 1].data(), tmp.data(),
                        beta[l - 1].data(), false);
    }
}

// H = alpha I + sum_l Mt_l diag(r_l) Mt_l^T with r_l = q_l * beta_l.
// Symmetrized before factorization; the gemm pairing is asymmetric at ulp level.
void build_hess(const IcnnParams& p, const std::vector<const double*>& q,
                const std::vector<Mat>& Mt, const std::vector<Vec>& beta,
                std::vector<Vec>& r, Mat& Pt, Mat& H) {
    const std::size_t L = p.layers(), D = p.dim;
    shape(H, D, D);
    H.fill(0.0);
    for (std::size_t d = 0; d < D; ++d) H(d, d) = p.alpha;
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t wl = p.widths[l];
        r[l].resize(wl);
        for (std::size_t i = 0; i < wl; ++i) r[l][i] = q[l][i] * beta[l][i];
        colscale_into(Mt[l], r[l].data(), Pt);
        kernels::gemm_nt(D, D, wl, Pt.data(), Mt[l].data(), H.data(), true);
    }
    symmetrize(H);
}

void ensure_grads_shape(const IcnnParams& p, IcnnGrads& g) {
    const std::size_t L = p.layers();
    bool ok = g.A.size() == L && g.b.size() == L && g.W.size() == L - 1 &&
              g.w_out.size() == p.widths[L - 1];
    for (std::size_t l = 0; ok && l < L; ++l)
        ok = g.A[l].rows == p.widths[l] && g.A[l].cols == p.dim &&
             g.b[l].size() == p.widths[l];
    for (std::size_t l = 0; ok && l + 1 < L; ++l)
        ok = g.W[l].rows == p.widths[l + 1] && g.W[l].cols == p.widths[l];
    if (!ok)
        g = icnn_grads_like(p);
    else
        g.zero();
}

}  // namespace

std::size_t IcnnParams::n_params() const {
    std::size_t n = 0;
    walk_tensors(*this, [&](const double*, std::size_t sz) { n += sz; });
    return n;
}

void IcnnGrads::zero() {
    walk_tensors(*this, [](double* d, std::size_t sz) { std::fill(d, d + sz, 0.0); });
}

IcnnParams icnn_zeroed(std::size_t dim, std::vector<std::size_t> widths, double alpha) {
    IcnnParams p;
    p.dim = dim;
    p.widths = std::move(widths);
    p.alpha = alpha;
    const std::size_t L = p.widths.size();
    if (dim == 0 || L == 0) throw InvalidArgument("icnn: empty architecture");
    for (auto w : p.widths)
        if (w == 0) throw InvalidArgument("icnn: zero-width layer");
    if (!(alpha > 0.0)) throw InvalidArgument("icnn: alpha must be positive");
    p.A.reserve(L);
    p.b.reserve(L);
    for (std::size_t l = 0; l < L; ++l) {
        p.A.emplace_back(p.widths[l], dim);
        p.b.emplace_back(p.widths[l], 0.0);
    }
    for (std::size_t l = 0; l + 1 < L; ++l) p.W.emplace_back(p.widths[l + 1], p.widths[l]);
    p.w_out.assign(p.widths[L - 1], 0.0);
    return p;
}

IcnnParams icnn_random_init(std::size_t dim, std::vector<std::size_t> widths,
                            double alpha, Rng& rng) {
    IcnnParams p = icnn_zeroed(dim, std::move(widths), alpha);
    const std::size_t L = p.layers();
    const double sd_a = 1.0 / std::sqrt(static_cast<double>(dim));
    for (std::size_t l = 0; l < L; ++l)
        for (auto& v : p.A[l].a) v = sd_a * rng.normal();
    for (std::size_t l = 0; l + 1 < L; ++l) {
        const double sd = 1.0 / std::sqrt(static_cast<double>(p.widths[l]));
        for (auto& v : p.W[l].a) v = sd * rng.normal();
    }
    const double sd_out = 1.0 / std::sqrt(static_cast<double>(p.widths[L - 1]));
    for (auto& v : p.w_out) v = std::fabs(sd_out * rng.normal());
    project_nonneg(p);
    return p;
}

IcnnGrads icnn_grads_like(const IcnnParams& p) {
    IcnnGrads g;
    const std::size_t L = p.layers();
    for (std::size_t l = 0; l < L; ++l) {
        g.A.emplace_back(p.widths[l], p.dim);
        g.b.emplace_back(p.widths[l], 0.0);
    }
    for (std::size_t l = 0; l + 1 < L; ++l) g.W.emplace_back(p.widths[l + 1], p.widths[l]);
    g.w_out.assign(p.widths[L - 1], 0.0);
    return g;
}

void project_nonneg(IcnnParams& p) {
    for (auto& w : p.W)
        for (auto& v : w.a) v = std::max(v, 0.0);
    for (auto& v : p.w_out) v = std::max(v, 0.0);
}

Vec icnn_flatten(const IcnnParams& p) {
    Vec out;
    out.reserve(p.n_params());
    walk_tensors(p, [&](const double* d, std::size_t sz) { out.insert(out.end(), d, d + sz); });
    return out;
}

void icnn_unflatten(IcnnParams& p, const Vec& flat) {
    if (flat.size() != p.n_params())
        throw InvalidArgument("icnn: flat vector length != n_params");
    std::size_t off = 0;
    walk_tensors(p, [&](double* d, std::size_t sz) {
        std::copy(flat.begin() + off, flat.begin() + off + sz, d);
        off += sz;
    });
}

Vec icnn_grads_flatten(const IcnnGrads& g, const IcnnParams& shape_of) {
    Vec out;
    out.reserve(shape_of.n_params());
    walk_tensors(g, [&](const double* d, std::size_t sz) { out.insert(out.end(), d, d + sz); });
    if (out.size() != shape_of.n_params())
        throw InvalidArgument("icnn: grads do not match parameter shape");
    return out;
}

IcnnEval icnn_eval(const IcnnParams& p, const double* x, EvalWant want) {
    check_shapes(p);
    const std::size_t L = p.layers(), D = p.dim;

    // Point ladder.
    std::vector<Vec> z(L), s(L), q(L);
    Vec u;
    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t wl = p.widths[l];
        u.resize(wl);
        kernels::gemv(wl, D, p.A[l].data(), x, u.data(), false);
        kernels::axpy(1.0, p.b[l].data(), u.data(), wl);
        if (l > 0)
            kernels::gemv(wl, p.widths[l - 1], p.W[l - 1].data(), z[l - 1].data(),
                          u.data(), true);
        z[l].resize(wl);
        s[l].resize(wl);
        q[l].resize(wl);
        softplus_ladder_fill(u.data(), wl, z[l].data(), s[l].data(), q[l].data(),
                             nullptr);
    }

    IcnnEval ev;
    ev.value = 0.5 * p.alpha * kernels::sqnorm(x, D) +
               kernels::dot(p.w_out.data(), z[L - 1].data(), p.widths[L - 1]);
    if (!want.grad && !want.hess) return ev;

    if (!want.hess) {
        // Reverse pass without Jacobians: vbar_l = d psi / d u_l.
        ev.grad.resize(D);
        for (std::size_t d = 0; d < D; ++d) ev.grad[d] = p.alpha * x[d];
        Vec vbar(p.widths[L - 1]), nb;
        for (std::size_t i = 0; i < vbar.size(); ++i)
            vbar[i] = s[L - 1][i] * p.w_out[i];
        for (std::size_t l = L; l-- > 0;) {
            kernels::gemv_t(p.widths[l], D, p.A[l].data(), vbar.data(), ev.grad.data(),
                            true);
            if (l == 0) break;
            nb.resize(p.widths[l - 1]);
            kernels::gemv_t(p.widths[l], p.widths[l - 1], p.W[l - 1].data(),
                            vbar.data(), nb.data(), false);
            for (std::size_t i = 0; i < nb.size(); ++i) nb[i] *= s[l - 1][i];
            std::swap(vbar, nb);
        }
        return ev;
    }

    std::vector<const double*> srow(L), qrow(L);
    for (std::size_t l = 0; l < L; ++l) {
        srow[l] = s[l].data();
        qrow[l] = q[l].data();
    }
    std::vector<Mat> Mt(L), Jt(L);
    build_mt(p, srow, Mt, Jt);

    const std::size_t wL = p.widths[L - 1];
    Vec sw(wL);
    for (std::size_t i = 0; i < wL; ++i) sw[i] = srow[L - 1][i] * p.w_out[i];
    ev.grad.resize(D);
    kernels::gemv(D, wL, Mt[L - 1].data(), sw.data(), ev.grad.data(), false);
    for (std::size_t d = 0; d < D; ++d) ev.grad[d] += p.alpha * x[d];

    std::vector<Vec> beta(L), r(L);
    Vec tmp(max_width(p));
    build_beta(p, srow, beta, tmp);
    Mat Pt;
    build_hess(p, qrow, Mt, beta, r, Pt, ev.hess);
    ev.hess_chol = chol(ev.hess);
    ev.logdet_hess = ev.hess_chol.logdet;
    return ev;
}

void icnn_push(const IcnnParams& p, const Mat& X, Mat& G) {
    check_shapes(p);
    check_batch(p, X);
    BatchLadder lad;
    batch_forward(p, X, false, lad);
    push_from_ladder(p, X, lad, G);
}

void icnn_push_logdet(const IcnnParams& p, const Mat& X, Mat& G, Vec& logdets) {
    check_shapes(p);
    check_batch(p, X);
    const std::size_t L = p.layers(), N = X.rows;
    BatchLadder lad;
    batch_forward(p, X, false, lad);
    push_from_ladder(p, X, lad, G);

    logdets.resize(N);
    std::vector<Mat> Mt(L), Jt(L);
    std::vector<Vec> beta(L), r(L);
    std::vector<const double*> srow(L), qrow(L);
    Mat Pt, H;
    Vec tmp(max_width(p));
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t l = 0; l < L; ++l) {
            srow[l] = lad.S[l].row(n);
            qrow[l] = lad.Q[l].row(n);
        }
        build_mt(p, srow, Mt, Jt);
        build_beta(p, srow, beta, tmp);
        build_hess(p, qrow, Mt, beta, r, Pt, H);
        logdets[n] = chol_logdet(H);
    }
}

Vec icnn_values(const IcnnParams& p, const Mat& X) {
    check_shapes(p);
    check_batch(p, X);
    const std::size_t L = p.layers(), N = X.rows;
    BatchLadder lad;
    batch_forward(p, X, false, lad);
    Vec out(N);
    for (std::size_t n = 0; n < N; ++n)
        out[n] = 0.5 * p.alpha * kernels::sqnorm(X.row(n), p.dim) +
                 kernels::dot(p.w_out.data(), lad.Z[L - 1].row(n), p.widths[L - 1]);
    return out;
}

IcnnLossTerms icnn_loss_grad(const IcnnParams& p, const Mat& X, const Potential* phi,
                             double h, double inv_beta, IcnnGrads& grads, Rng* rng) {
    check_shapes(p);
    check_batch(p, X);
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("icnn loss: h must be positive");
    if (inv_beta < 0.0 || !std::isfinite(inv_beta))
        throw InvalidArgument("icnn loss: inv_beta must be >= 0");
    ensure_grads_shape(p, grads);

    const std::size_t L = p.layers(), N = X.rows, D = p.dim;
    const std::size_t wL = p.widths[L - 1];
    const std::size_t wmax = max_width(p);
    const bool with_h = inv_beta != 0.0;

    BatchLadder lad;
    batch_forward(p, X, with_h, lad);
    Mat G;
    push_from_ladder(p, X, lad, G);

    // Per-sample workspaces, shaped once and reused.
    std::vector<Mat> Mt(L), Jt(L), SM(L);
    std::vector<Vec> beta(L), r(L), rbar(L), sbar(L);
    for (std::size_t l = 0; l < L; ++l) {
        sbar[l].resize(p.widths[l]);
        if (with_h) rbar[l].resize(p.widths[l]);
    }
    Mat Pt, H, Hbar;
    Vec tmp(wmax), sw(wL), mg(wL), wb(wmax), Bb(wmax), zb(wmax);
    Vec gphi(D), Gbar(D);
    Vec mbt(D * wmax), jbt(D * wmax);
    std::vector<const double*> srow(L), qrow(L), trow(L);

    // u-adjoints per sample, consumed by the batched products at the end.
    std::vector<Mat> Ub(L);
    for (std::size_t l = 0; l < L; ++l) Ub[l] = Mat(N, p.widths[l]);

    double sum_w2 = 0.0, sum_phi = 0.0, sum_logdet = 0.0;

    for (std::size_t n = 0; n < N; ++n) {
        const double* x = X.row(n);
        const double* g = G.row(n);
        for (std::size_t l = 0; l < L; ++l) {
            srow[l] = lad.S[l].row(n);
            qrow[l] = lad.Q[l].row(n);
            if (with_h) trow[l] = lad.T[l].row(n);
        }

        // Loss pieces and Gbar = d loss_n / d g (before the 1/N).
        double w2n = 0.0;
        for (std::size_t d = 0; d < D; ++d) {
            const double diff = g[d] - x[d];
            w2n += diff * diff;
            Gbar[d] = diff / h;
        }
        sum_w2 += w2n;
        if (phi) {
            sum_phi += potential_value_grad(*phi, g, D, gphi.data(), rng);
            for (std::size_t d = 0; d < D; ++d) Gbar[d] += gphi[d];
        }

        build_mt(p, srow, Mt, Jt);

        if (with_h) {
            build_beta(p, srow, beta, tmp);
            build_hess(p, qrow, Mt, beta, r, Pt, H);
            const Cholesky ch = chol(H);
            sum_logdet += ch.logdet;
            const Mat Hinv = ch.inverse();
            // Hbar = d loss_n / d H = -inv_beta H^-1.
            shape(Hbar, D, D);
            for (std::size_t i = 0; i < D * D; ++i) Hbar.a[i] = -inv_beta * Hinv.a[i];
            for (std::size_t l = 0; l < L; ++l) {
                const std::size_t wl = p.widths[l];
                shape(SM[l], D, wl);
                kernels::gemm_nn(D, wl, D, Hbar.data(), Mt[l].data(), SM[l].data(),
                                 false);
                std::fill(rbar[l].begin(), rbar[l].end(), 0.0);
                coldot_acc(Mt[l].data(), SM[l].data(), D, wl, rbar[l].data());
            }
        }

        for (std::size_t l = 0; l < L; ++l)
            std::fill(sbar[l].begin(), sbar[l].end(), 0.0);

        // Gradient head: g = alpha x + Mt_{L-1} (s_{L-1} * w_out).
        for (std::size_t i = 0; i < wL; ++i) sw[i] = srow[L - 1][i] * p.w_out[i];
        kernels::gemv_t(D, wL, Mt[L - 1].data(), Gbar.data(), mg.data(), false);
        for (std::size_t i = 0; i < wL; ++i) {
            sbar[L - 1][i] += p.w_out[i] * mg[i];
            grads.w_out[i] += srow[L - 1][i] * mg[i];
        }

        // Adjoint of the beta recurrence, ascending. Bb = d loss_n / d beta_l.
        if (with_h) {
            for (std::size_t i = 0; i < p.widths[0]; ++i)
                Bb[i] = qrow[0][i] * rbar[0][i];
            for (std::size_t l = 1; l < L; ++l) {
                const std::size_t wl = p.widths[l], wp = p.widths[l - 1];
                for (std::size_t i = 0; i < wl; ++i) tmp[i] = beta[l][i] * srow[l][i];
                Mat& Wg = grads.W[l - 1];
                for (std::size_t i = 0; i < wl; ++i)
                    if (tmp[i] != 0.0) kernels::axpy(tmp[i], Bb.data(), Wg.row(i), wp);
                kernels::gemv(wl, wp, p.W[l - 1].data(), Bb.data(), wb.data(), false);
                for (std::size_t i = 0; i < wl; ++i) {
                    sbar[l][i] += beta[l][i] * wb[i];
                    Bb[i] = qrow[l][i] * rbar[l][i] + srow[l][i] * wb[i];
                }
            }
            for (std::size_t i = 0; i < wL; ++i) grads.w_out[i] += Bb[i];
        }

        // Adjoint of the Mt recurrence, descending. mbt = d loss_n / d Mt_l.
        std::size_t wcur = wL;
        for (std::size_t d = 0; d < D; ++d) {
            double* row = mbt.data() + d * wcur;
            const double gb = Gbar[d];
            for (std::size_t i = 0; i < wcur; ++i) row[i] = gb * sw[i];
        }
        if (with_h) {
            for (std::size_t d = 0; d < D; ++d) {
                double* row = mbt.data() + d * wcur;
                const double* sm = SM[L - 1].row(d);
                for (std::size_t i = 0; i < wcur; ++i) row[i] += 2.0 * sm[i] * r[L - 1][i];
            }
        }
        for (std::size_t l = L - 1; l-- > 0;) {
            const std::size_t wl = p.widths[l], wn = p.widths[l + 1];
            kernels::gemm_tn_acc(wn, wl, D, mbt.data(), Jt[l].data(),
                                 grads.W[l].data());
            for (std::size_t i = 0; i < wn; ++i) {
                double* arow = grads.A[l + 1].row(i);
                for (std::size_t d = 0; d < D; ++d) arow[d] += mbt[d * wn + i];
            }
            kernels::gemm_nn(D, wl, wn, mbt.data(), p.W[l].data(), jbt.data(), false);
            coldot_acc(jbt.data(), Mt[l].data(), D, wl, sbar[l].data());
            for (std::size_t d = 0; d < D; ++d) {
                double* row = mbt.data() + d * wl;
                const double* jrow = jbt.data() + d * wl;
                const double* sm = with_h ? SM[l].row(d) : nullptr;
                for (std::size_t i = 0; i < wl; ++i) {
                    double v = jrow[i] * srow[l][i];
                    if (sm) v += 2.0 * sm[i] * r[l][i];
                    row[i] = v;
                }
            }
            wcur = wl;
        }
        for (std::size_t i = 0; i < p.widths[0]; ++i) {
            double* arow = grads.A[0].row(i);
            for (std::size_t d = 0; d < D; ++d) arow[d] += mbt[d * p.widths[0] + i];
        }

        // Descend to the pre-activation adjoints; parameter gradients hanging
        // off u_l are batched after the sample loop.
        for (std::size_t l = L; l-- > 0;) {
            const std::size_t wl = p.widths[l];
            double* ub = Ub[l].row(n);
            for (std::size_t i = 0; i < wl; ++i) {
                double v = sbar[l][i] * qrow[l][i];
                if (with_h) v += beta[l][i] * rbar[l][i] * trow[l][i];
                if (l + 1 < L) v += zb[i] * srow[l][i];
                ub[i] = v;
            }
            if (l > 0)
                kernels::gemv_t(wl, p.widths[l - 1], p.W[l - 1].data(), ub, zb.data(),
                                false);
        }
    }

    for (std::size_t l = 0; l < L; ++l) {
        const std::size_t wl = p.widths[l];
        kernels::gemm_tn_acc(wl, D, N, Ub[l].data(), X.data(), grads.A[l].data());
        for (std::size_t n = 0; n < N; ++n)
            kernels::axpy(1.0, Ub[l].row(n), grads.b[l].data(), wl);
        if (l > 0)
            kernels::gemm_tn_acc(wl, p.widths[l - 1], N, Ub[l].data(),
                                 lad.Z[l - 1].data(), grads.W[l - 1].data());
    }
    const double inv_n = 1.0 / static_cast<double>(N);
    walk_tensors(grads, [&](double* d, std::size_t sz) {
        for (std::size_t i = 0; i < sz; ++i) d[i] *= inv_n;
    });

    IcnnLossTerms terms;
    terms.w2 = sum_w2 * inv_n;
    terms.potential = sum_phi * inv_n;
    terms.entropy_gain = sum_logdet * inv_n;
    terms.total = terms.w2 / (2.0 * h) + terms.potential - inv_beta * terms.entropy_gain;
    if (!std::isfinite(terms.total))
        throw NonFiniteLoss("icnn loss: non-finite total (w2 " + std::to_string(terms.w2) +
                            ", potential " + std::to_string(terms.potential) +
                            ", entropy " + std::to_string(terms.entropy_gain) + ")");
    return terms;
}

IcnnLossTerms icnn_loss(const IcnnParams& p, const Mat& X, const Potential* phi,
                        double h, double inv_beta, Rng* rng) {
    check_shapes(p);
    check_batch(p, X);
    if (!(h > 0.0) || !std::isfinite(h)) throw InvalidArgument("icnn loss: h must be positive");
    if (inv_beta < 0.0 || !std::isfinite(inv_beta))
        throw InvalidArgument("icnn loss: inv_beta must be >= 0");

    const std::size_t N = X.rows, D = p.dim;
    Mat G;
    Vec logdets;
    if (inv_beta != 0.0)
        icnn_push_logdet(p, X, G, logdets);
    else
        icnn_push(p, X, G);

    double sum_w2 = 0.0, sum_phi = 0.0, sum_logdet = 0.0;
    Vec diff(D);
    for (std::size_t n = 0; n < N; ++n) {
        const double* x = X.row(n);
        const double* g = G.row(n);
        for (std::size_t d = 0; d < D; ++d) diff[d] = g[d] - x[d];
        sum_w2 += kernels::sqnorm(diff.data(), D);
        if (phi) sum_phi += potential_value(*phi, g, D, rng);
        if (inv_beta != 0.0) sum_logdet += logdets[n];
    }
    const double inv_n = 1.0 / static_cast<double>(N);
    IcnnLossTerms terms;
    terms.w2 = sum_w2 * inv_n;
    terms.potential = sum_phi * inv_n;
    terms.entropy_gain = sum_logdet * inv_n;
    terms.total = terms.w2 / (2.0 * h) + terms.potential - inv_beta * terms.entropy_gain;
    if (!std::isfinite(terms.total))
        throw NonFiniteLoss("icnn loss: non-finite total");
    return terms;
}

AdamState adam_init(const IcnnParams& p) {
    AdamState st;
    st.m.assign(p.n_params(), 0.0);
    st.v.assign(p.n_params(), 0.0);
    st.t = 0;
    return st;
}

void adam_step(IcnnParams& p, const IcnnGrads& g, AdamState& st, double lr,
               const AdamConfig& cfg) {
    const std::size_t n = p.n_params();
    if (st.m.size() != n || st.v.size() != n)
        throw InvalidArgument("adam: state does not match parameter count");

    std::vector<std::pair<double*, std::size_t>> ps;
    walk_tensors(p, [&](double* d, std::size_t sz) { ps.push_back({d, sz}); });
    std::vector<std::pair<const double*, std::size_t>> gs;
    walk_tensors(g, [&](const double* d, std::size_t sz) { gs.push_back({d, sz}); });
    if (ps.size() != gs.size()) throw InvalidArgument("adam: grads do not match parameters");

    st.t += 1;
    const double c1 = 1.0 - std::pow(cfg.beta1, static_cast<double>(st.t));
    const double c2 = 1.0 - std::pow(cfg.beta2, static_cast<double>(st.t));
    std::size_t off = 0;
    for (std::size_t k = 0; k < ps.size(); ++k) {
        if (ps[k].second != gs[k].second)
            throw InvalidArgument("adam: grads do not match parameters");
        double* theta = ps[k].first;
        const double* grad = gs[k].first;
        for (std::size_t i = 0; i < ps[k].second; ++i, ++off) {
            const double gi = grad[i];
            st.m[off] = cfg.beta1 * st.m[off] + (1.0 - cfg.beta1) * gi;
            st.v[off] = cfg.beta2 * st.v[off] + (1.0 - cfg.beta2) * gi * gi;
            theta[i] -= lr * (st.m[off] / c1) / (std::sqrt(st.v[off] / c2) + cfg.eps);
        }
    }
    project_nonneg(p);
}

PretrainResult icnn_pretrain_identity(IcnnParams& p, const PretrainConfig& cfg,
                                      Rng& rng, const Mat* pool) {
    check_shapes(p);
    if (cfg.batch == 0 || cfg.holdout == 0 || cfg.max_iters == 0 ||
        cfg.check_every == 0 || !(cfg.tol > 0.0) || !(cfg.input_std > 0.0) ||
        !(cfg.lr > 0.0))
        throw InvalidArgument("pretrain: bad config");
    if (pool && (pool->cols != p.dim || pool->rows == 0))
        throw DimensionMismatch("pretrain: pool shape does not match the net");

    const auto fill_inputs = [&](Mat& m) {
        if (pool) {
            for (std::size_t i = 0; i < m.rows; ++i) {
                const double* src = pool->row(rng.uniform_index(pool->rows));
                std::copy(src, src + m.cols, m.row(i));
            }
        } else {
            for (auto& v : m.a) v = cfg.input_std * rng.normal();
        }
    };

    // With Phi == 0, inv_beta == 0 and h == 1/2 the objective is exactly
    // mean |grad psi(x) - x|^2.
    const double kh = 0.5;

    Mat hold(cfg.holdout, p.dim);
    fill_inputs(hold);

    double best = icnn_loss(p, hold, nullptr, kh, 0.0).total;
    if (best < cfg.tol) return {0, best};

    AdamState st = adam_init(p);
    IcnnGrads g = icnn_grads_like(p);
    Mat batch(cfg.batch, p.dim);
    double lr = cfg.lr;
    bool halved = false;
    for (std::size_t iter = 1; iter <= cfg.max_iters; ++iter) {
        fill_inputs(batch);
        icnn_loss_grad(p, batch, nullptr, kh, 0.0, g, nullptr);
        adam_step(p, g, st, lr);
        if (iter % cfg.check_every == 0 || iter == cfg.max_iters) {
            const double hl = icnn_loss(p, hold, nullptr, kh, 0.0).total;
            best = std::min(best, hl);
            if (hl < cfg.tol) return {iter, hl};
            if (!halved && iter >= (cfg.max_iters * 3) / 5) {
                lr *= 0.5;
                halved = true;
            }
        }
    }
    throw PretrainDiverged("pretrain: holdout " + std::to_string(best) + " above tol " +
                           std::to_string(cfg.tol) + " after " +
                           std::to_string(cfg.max_iters) + " iters");
}

}  // namespace wgf
