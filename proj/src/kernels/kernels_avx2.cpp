#include "kernels_internal.hpp"

#if WGF_KERNELS_HAVE_AVX2

#include <immintrin.h>

#include <cstring>

// AVX2+FMA variants. Compiled with -mavx2 -mfma for this file only; the
// dispatcher never calls in here unless cpuid reports both features.

namespace wgf::kernels::avx2_impl {

namespace {

inline double hsum(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d swapped = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

double dot(const double* x, const double* y, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i + 4), _mm256_loadu_pd(y + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i), acc0);
    double acc = hsum(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) acc += x[i] * y[i];
    return acc;
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(a);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += a * x[i];
}

double sum(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i];
    return s;
}

double sqnorm(const double* x, std::size_t n) {
    __m256d acc = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d v = _mm256_loadu_pd(x + i);
        acc = _mm256_fmadd_pd(v, v, acc);
    }
    double s = hsum(acc);
    for (; i < n; ++i) s += x[i] * x[i];
    return s;
}

void gemv(std::size_t m, std::size_t n, const double* A, const double* x, double* y,
          bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double base = accumulate ? y[i] : 0.0;
        y[i] = base + dot(A + i * n, x, n);
    }
}

void gemv_t(std::size_t m, std::size_t n, const double* A, const double* x, double* y,
            bool accumulate) {
    if (!accumulate) std::memset(y, 0, n * sizeof(double));
    for (std::size_t i = 0; i < m; ++i) {
        const double xi = x[i];
        if (xi == 0.0) continue;
        axpy(xi, A + i * n, y, n);
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
            axpy(a, B + p * n, crow, n);
        }
    }
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C, bool accumulate) {
    for (std::size_t i = 0; i < m; ++i) {
        const double* arow = A + i * k;
        double* crow = C + i * n;
        for (std::size_t j = 0; j < n; ++j) {
            const double base = accumulate ? crow[j] : 0.0;
            crow[j] = base + dot(arow, B + j * k, k);
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
            axpy(a, brow, C + i * n, n);
        }
    }
}

}  // namespace wgf::kernels::avx2_impl

#endif  // WGF_KERNELS_HAVE_AVX2
