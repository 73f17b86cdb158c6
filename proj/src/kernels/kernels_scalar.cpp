#include <cstring>

#include "kernels_internal.hpp"

// Reference implementations. Plain loops, one accumulator, no reassociation:
// these define the semantics the SIMD variants are tested against.

namespace wgf::kernels::scalar_impl {

double dot(const double* x, const double* y, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

double sum(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i];
    return acc;
}

double sqnorm(const double* x, std::size_t n) {
    double acc = 0.0;
    for (std::size_t i = 0; i < n; ++i) acc += x[i] * x[i];
    return acc;
}

void gemv(std::size_t m, std::size_t n, const double* A, const double* x, double* y,
          bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        double acc = accumulate ? y[i] : 0.0;
        const double* row = A + i * n;
        for (std::size_t j = 0; j < n; ++j) acc += row[j] * x[j];
        y[i] = acc;
    }
}

void gemv_t(std::size_t m, std::size_t n, const double* A, const double* x, double* y,
            bool accumulate) {
    if (!accumulate)
        for (std::size_t j = 0; j < n; ++j) y[j] = 0.0;
    for (std::size_t i = 0; i < m; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        const double* row = A + i * n;
        for (std::size_t j = 0; j < n; ++j) y[j] += xi * row[j];
    }
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C, bool accumulate) {
    if (!accumulate) std::memset(C, 0, m * n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        double* crow = C + i * n;
        for (std::size_t p = 0; p < k; ++p) {
            const double a = A[i * k + p];
            if (a == 0.0) continue;
            const double* brow = B + p * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = A + i * k;
        double* crow = C + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            double acc = accumulate ? crow[j] : 0.0;
            const double* brow = B + j * k;
            for (std::size_t p = 0; p < k; ++p) acc += arow[p] * brow[p];
            crow[j] = acc;
        }
    }
}

void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t rows, const double* A,
                 const double* B, double* C) {
    for (std::size_t r = 0; r < rows; ++r) {
        const double* arow = A + r * m;
        const double* brow = B + r * n;
        for (std::size_t i = 0; i < m; ++i) {
            const double a = arow[i];
            if (a == 0.0) continue;
            double* crow = C + i * n;
            for (std::size_t j = 0; j < n; ++j) crow[j] += a * brow[j];
        }
    }
}

}  // namespace wgf::kernels::scalar_impl
