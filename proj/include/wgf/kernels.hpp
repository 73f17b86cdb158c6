#pragma once

#include <cstddef>
#include <string>

// Data-parallel kernels behind everything in numcore. Each operation has a
// scalar reference implementation and an AVX2+FMA variant; the active backend
// is picked once at startup from cpuid, or forced via WGF_KERNELS=scalar|avx2.
// Backends agree to rounding (SIMD reductions reassociate sums, so results are
// equal to ~1e-13 relative, not bitwise); on a fixed machine the dispatch is
// stable, so runs remain reproducible.

namespace wgf::kernels {

enum class Backend { scalar, avx2 };

// Active backend, resolved on first call.
Backend active_backend();
const char* backend_name();

// Force a backend (tests). Throws InvalidArgument if unavailable on this CPU.
void set_backend(Backend b);

bool avx2_available();

// x . y
double dot(const double* x, const double* y, std::size_t n);
// y += a * x
void axpy(double a, const double* x, double* y, std::size_t n);
double sum(const double* x, std::size_t n);
double sqnorm(const double* x, std::size_t n);

// Row-major dense products. C is m x n.
//   gemv:        y = A x        (A m x n; acc: y += A x)
//   gemv_t:      y = A^T x      (A m x n, x m, y n)
//   gemm_nn:     C = A B        (A m x k, B k x n)
//   gemm_nt:     C = A B^T      (A m x k, B n x k)
//   gemm_tn_acc: C += A^T B     (A rows x m, B rows x n)
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

}  // namespace wgf::kernels
