#pragma once

#include "wgf/mat.hpp"

namespace wgf {

// Cholesky factorization H = L L^T of a symmetric positive definite matrix.
// Only the lower triangle of H is read. Throws NotPositiveDefinite when a
// pivot is <= 0, DimensionMismatch for non-square or dim > 256 (guard against
// silently quadratic-memory misuse; everything in this codebase is small).
struct Cholesky {
    Mat L;          // lower triangular
    double logdet;  // 2 * sum log L_ii

    std::size_t dim() const { return L.rows; }

    // Solve (L L^T) x = b in place.
    void solve(Vec& b) const;
    Vec solve_copy(const Vec& b) const;
    // Full inverse (L^-T L^-1), symmetric.
    Mat inverse() const;
};

Cholesky chol(const Mat& h);
double chol_logdet(const Mat& h);

// Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.
// a must be symmetric to 1e-10 (max abs asymmetry), else NotSymmetric.
// Columns of vectors are eigenvectors; a == V diag(values) V^T.
struct SymEig {
    Vec values;
    Mat vectors;
};
SymEig sym_eig(const Mat& a);

// exp(-a*t) for symmetric a, via the eigendecomposition. Result symmetrized.
Mat sym_expm(const Mat& a, double t);

// SPD helpers used by the closed-form Gaussian machinery.
Mat spd_inverse(const Mat& a);
// Symmetric square root: V diag(sqrt(lambda)) V^T. Eigenvalues must be >= 0.
Mat sym_sqrt(const Mat& a);

}  // namespace wgf
