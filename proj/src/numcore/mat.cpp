#include "wgf/mat.hpp"

#include <cmath>

#include "wgf/kernels.hpp"

namespace wgf {

Mat transpose(const Mat& m) {
    Mat t(m.cols, m.rows);
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = 0; j < m.cols; ++j) t(j, i) = m(i, j);
    return t;
}

Mat matmul(const Mat& x, const Mat& y) {
    if (x.cols != y.rows) throw DimensionMismatch("matmul: inner dimensions differ");
    Mat c(x.rows, y.cols);
    kernels::gemm_nn(x.rows, y.cols, x.cols, x.data(), y.data(), c.data(), false);
    return c;
}

void matvec(const Mat& m, const Vec& x, Vec& out) {
    if (m.cols != x.size()) throw DimensionMismatch("matvec: dimensions differ");
    out.resize(m.rows);
    kernels::gemv(m.rows, m.cols, m.data(), x.data(), out.data(), false);
}

Vec matvec(const Mat& m, const Vec& x) {
    Vec out;
    matvec(m, x, out);
    return out;
}

double max_asymmetry(const Mat& m) {
    if (m.rows != m.cols) throw DimensionMismatch("max_asymmetry: matrix not square");
    double worst = 0.0;
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = i + 1; j < m.cols; ++j)
            worst = std::max(worst, std::fabs(m(i, j) - m(j, i)));
    return worst;
}

void symmetrize(Mat& m) {
    if (m.rows != m.cols) throw DimensionMismatch("symmetrize: matrix not square");
    for (std::size_t i = 0; i < m.rows; ++i)
        for (std::size_t j = i + 1; j < m.cols; ++j) {
            const double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = v;
            m(j, i) = v;
        }
}

double max_abs_diff(const Mat& x, const Mat& y) {
    if (x.rows != y.rows || x.cols != y.cols)
        throw DimensionMismatch("max_abs_diff: shapes differ");
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        worst = std::max(worst, std::fabs(x.a[i] - y.a[i]));
    return worst;
}

double max_abs_diff(const Vec& x, const Vec& y) {
    if (x.size() != y.size()) throw DimensionMismatch("max_abs_diff: lengths differ");
    double worst = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i)
        worst = std::max(worst, std::fabs(x[i] - y[i]));
    return worst;
}

}  // namespace wgf
