#pragma once

#include <cstddef>
#include <vector>

#include "wgf/linalg.hpp"
#include "wgf/mat.hpp"
#include "wgf/potential.hpp"
#include "wgf/rng.hpp"

namespace wgf {

// Dense input-convex network
//   psi(x) = alpha/2 |x|^2 + w_out . z_{L-1}
//   z_0 = sp(A_0 x + b_0)
//   z_l = sp(W_{l-1} z_{l-1} + A_l x + b_l),  l = 1 .. L-1
// with softplus sp. W_l and w_out are kept elementwise nonnegative (projected
// after every optimizer step), which makes psi convex; the quadratic skip term
// makes it alpha-strongly convex, so hess psi >= alpha I everywhere and
// x -> grad psi(x) is a bijection on R^dim.
struct IcnnParams {
    std::size_t dim = 0;
    std::vector<std::size_t> widths;  // w_0 .. w_{L-1}
    double alpha = 0.01;              // strong-convexity floor; not trained

    std::vector<Mat> A;  // A_l: widths[l] x dim
    std::vector<Vec> b;  // b_l: widths[l]
    std::vector<Mat> W;  // W_l: widths[l+1] x widths[l], nonnegative
    Vec w_out;           // widths[L-1], nonnegative

    std::size_t layers() const { return widths.size(); }
    std::size_t n_params() const;
};

// Same tensor layout as IcnnParams, holding d loss / d theta.
struct IcnnGrads {
    std::vector<Mat> A;
    std::vector<Vec> b;
    std::vector<Mat> W;
    Vec w_out;

    void zero();
};

IcnnParams icnn_zeroed(std::size_t dim, std::vector<std::size_t> widths, double alpha);

// A_l ~ N(0, 1/dim), W_l ~ N(0, 1/widths[l]) clamped to >= 0, biases zero,
// w_out = |N(0, 1/widths[L-1])|.
IcnnParams icnn_random_init(std::size_t dim, std::vector<std::size_t> widths,
                            double alpha, Rng& rng);

IcnnGrads icnn_grads_like(const IcnnParams& p);

// Clamps W_l and w_out to the nonnegative orthant in place.
void project_nonneg(IcnnParams& p);

// Flat layout: A_0, b_0, .., A_{L-1}, b_{L-1}, W_0, .., W_{L-2}, w_out.
// icnn_unflatten requires the exact n_params() length.
Vec icnn_flatten(const IcnnParams& p);
void icnn_unflatten(IcnnParams& p, const Vec& flat);
Vec icnn_grads_flatten(const IcnnGrads& g, const IcnnParams& shape);

struct EvalWant {
    bool grad = false;
    bool hess = false;  // implies grad; also fills logdet_hess and hess_chol
};

struct IcnnEval {
    double value = 0.0;
    Vec grad;
    Mat hess;            // symmetric, >= alpha I
    double logdet_hess = 0.0;
    Cholesky hess_chol;  // valid iff hess was requested
};

IcnnEval icnn_eval(const IcnnParams& p, const double* x, EvalWant want);

// Batched pushforward: G.row(i) = grad psi(X.row(i)). G is resized.
void icnn_push(const IcnnParams& p, const Mat& X, Mat& G);
// Same plus logdet hess psi at every row.
void icnn_push_logdet(const IcnnParams& p, const Mat& X, Mat& G, Vec& logdets);
Vec icnn_values(const IcnnParams& p, const Mat& X);

// One proximal-step objective over a sample batch:
//   total = w2 / (2h) + potential - inv_beta * entropy_gain
//   w2           = mean |grad psi(x) - x|^2
//   potential    = mean Phi(grad psi(x))
//   entropy_gain = mean logdet hess psi(x)
struct IcnnLossTerms {
    double total = 0.0;
    double w2 = 0.0;
    double potential = 0.0;
    double entropy_gain = 0.0;
};

// Loss and exact d total / d theta in one pass (hand-rolled adjoint; no
// autodiff). phi == nullptr means Phi == 0. inv_beta == 0 skips the Hessian
// machinery entirely (pretraining path). rng only feeds minibatched
// potentials. Throws NonFiniteLoss when the total stops being finite.
IcnnLossTerms icnn_loss_grad(const IcnnParams& p, const Mat& X, const Potential* phi,
                             double h, double inv_beta, IcnnGrads& grads,
                             Rng* rng = nullptr);
// Forward-only evaluation of the same objective (holdout monitoring).
IcnnLossTerms icnn_loss(const IcnnParams& p, const Mat& X, const Potential* phi,
                        double h, double inv_beta, Rng* rng = nullptr);

struct AdamConfig {
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

struct AdamState {
    Vec m;
    Vec v;
    long t = 0;
};

AdamState adam_init(const IcnnParams& p);

// Standard Adam with bias correction, eps added after the square root,
// followed by project_nonneg.
void adam_step(IcnnParams& p, const IcnnGrads& g, AdamState& st, double lr,
               const AdamConfig& cfg = {});

struct PretrainConfig {
    double lr = 3e-3;
    std::size_t batch = 256;
    std::size_t max_iters = 8000;
    std::size_t check_every = 100;
    double tol = 1e-2;         // holdout mean |grad psi(x) - x|^2
    std::size_t holdout = 2048;
    double input_std = 2.0;    // x ~ N(0, input_std^2 I)
};

struct PretrainResult {
    std::size_t iters = 0;
    double loss = 0.0;
};

// Fits grad psi ~ identity; every trained flow starts from this map. Inputs
// are x ~ N(0, input_std^2 I), or rows of `pool` when given, so the map is
// near-identity on the measure it will actually see. Throws PretrainDiverged
// when the budget runs out above tol.
PretrainResult icnn_pretrain_identity(IcnnParams& p, const PretrainConfig& cfg,
                                      Rng& rng, const Mat* pool = nullptr);

}  // namespace wgf
