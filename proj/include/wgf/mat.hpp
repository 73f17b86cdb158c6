#pragma once

#include <cstddef>
#include <vector>

#include "wgf/errors.hpp"

namespace wgf {

using Vec = std::vector<double>;

// Dense row-major matrix of doubles. Deliberately minimal: storage, indexing,
// and the handful of whole-matrix helpers the solvers need. Heavy products go
// through wgf::kernels at the call sites that care.
struct Mat {
    std::size_t rows = 0;
    std::size_t cols = 0;
    std::vector<double> a;

    Mat() = default;
    Mat(std::size_t r, std::size_t c) : rows(r), cols(c), a(r * c, 0.0) {}
    Mat(std::size_t r, std::size_t c, double fill) : rows(r), cols(c), a(r * c, fill) {}

    double& operator()(std::size_t i, std::size_t j) { return a[i * cols + j]; }
    double operator()(std::size_t i, std::size_t j) const { return a[i * cols + j]; }

    double* data() { return a.data(); }
    const double* data() const { return a.data(); }
    double* row(std::size_t i) { return a.data() + i * cols; }
    const double* row(std::size_t i) const { return a.data() + i * cols; }

    std::size_t size() const { return a.size(); }

    static Mat identity(std::size_t n) {
        Mat m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    void fill(double v) { a.assign(a.size(), v); }
};

Mat transpose(const Mat& m);
Mat matmul(const Mat& x, const Mat& y);            // x * y
void matvec(const Mat& m, const Vec& x, Vec& out);  // out = m * x
Vec matvec(const Mat& m, const Vec& x);

// Largest |m(i,j) - m(j,i)|; 0 for non-square is an error.
double max_asymmetry(const Mat& m);
void symmetrize(Mat& m);

double max_abs_diff(const Mat& x, const Mat& y);
double max_abs_diff(const Vec& x, const Vec& y);

}  // namespace wgf
