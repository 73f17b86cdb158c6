#pragma once

#include <cstddef>

// Per-backend entry points. Signatures mirror the public API in kernels.hpp.

namespace wgf::kernels::scalar_impl {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sqnorm(const double* x, std::size_t n);
void gemv(std::size_t m, std::size_t n, const double* A, const double* x, double* y,
          bool accumulate);
void gemv_t(std::size_t m, std::size_t n, const double* A, const double* x, double* y,
            bool accumulate);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C, bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C, bool accumulate);
void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t rows, const double* A,
                 const double* B, double* C);
}  // namespace wgf::kernels::scalar_impl

#if defined(__x86_64__) || defined(_M_X64)
#define WGF_KERNELS_HAVE_AVX2 1
namespace wgf::kernels::avx2_impl {
double dot(const double* x, const double* y, std::size_t n);
void axpy(double a, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sqnorm(const double* x, std::size_t n);
void gemv(std::size_t m, std::size_t n, const double* A, const double* x, double* y,
          bool accumulate);
void gemv_t(std::size_t m, std::size_t n, const double* A, const double* x, double* y,
            bool accumulate);
void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C, bool accumulate);
void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C, bool accumulate);
void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t rows, const double* A,
                 const double* B, double* C);
}  // namespace wgf::kernels::avx2_impl
#else
#define WGF_KERNELS_HAVE_AVX2 0
#endif
