#include "wgf/kernels.hpp"

#include <cstdlib>
#include <string>

#include "kernels_internal.hpp"
#include "wgf/errors.hpp"

namespace wgf::kernels {

namespace {

struct Vtable {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    double (*sum)(const double*, std::size_t);
    double (*sqnorm)(const double*, std::size_t);
    void (*gemv)(std::size_t, std::size_t, const double*, const double*, double*, bool);
    void (*gemv_t)(std::size_t, std::size_t, const double*, const double*, double*, bool);
    void (*gemm_nn)(std::size_t, std::size_t, std::size_t, const double*, const double*,
                    double*, bool);
    void (*gemm_nt)(std::size_t, std::size_t, std::size_t, const double*, const double*,
                    double*, bool);
    void (*gemm_tn_acc)(std::size_t, std::size_t, std::size_t, const double*, const double*,
                        double*);
};

constexpr Vtable kScalar = {
    scalar_impl::dot,     scalar_impl::axpy,    scalar_impl::sum,
    scalar_impl::sqnorm,  scalar_impl::gemv,    scalar_impl::gemv_t,
    scalar_impl::gemm_nn, scalar_impl::gemm_nt, scalar_impl::gemm_tn_acc,
};

#if WGF_KERNELS_HAVE_AVX2
constexpr Vtable kAvx2 = {
    avx2_impl::dot,     avx2_impl::axpy,    avx2_impl::sum,
    avx2_impl::sqnorm,  avx2_impl::gemv,    avx2_impl::gemv_t,
    avx2_impl::gemm_nn, avx2_impl::gemm_nt, avx2_impl::gemm_tn_acc,
};
#endif

Backend g_backend = Backend::scalar;
const Vtable* g_vt = &kScalar;
bool g_resolved = false;

void apply(Backend b) {
    if (b == Backend::avx2) {
#if WGF_KERNELS_HAVE_AVX2
        if (!avx2_available())
            throw InvalidArgument("kernels: avx2 backend requested but cpu lacks avx2+fma");
        g_vt = &kAvx2;
#else
        throw InvalidArgument("kernels: avx2 backend not built on this architecture");
#endif
    } else {
        g_vt = &kScalar;
    }
    g_backend = b;
    g_resolved = true;
}

void resolve_once() {
    if (g_resolved) return;
    if (const char* env = std::getenv("WGF_KERNELS")) {
        const std::string v(env);
        if (v == "scalar") {
            apply(Backend::scalar);
            return;
        }
        if (v == "avx2") {
            apply(Backend::avx2);
            return;
        }
        // anything else (including "auto") falls through to detection
    }
    apply(avx2_available() ? Backend::avx2 : Backend::scalar);
}

}  // namespace

bool avx2_available() {
#if WGF_KERNELS_HAVE_AVX2
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend active_backend() {
    resolve_once();
    return g_backend;
}

const char* backend_name() {
    resolve_once();
    return g_backend == Backend::avx2 ? "avx2" : "scalar";
}

void set_backend(Backend b) { apply(b); }

double dot(const double* x, const double* y, std::size_t n) {
    resolve_once();
    return g_vt->dot(x, y, n);
}

void axpy(double a, const double* x, double* y, std::size_t n) {
    resolve_once();
    g_vt->axpy(a, x, y, n);
}

double sum(const double* x, std::size_t n) {
    resolve_once();
    return g_vt->sum(x, n);
}

double sqnorm(const double* x, std::size_t n) {
    resolve_once();
    return g_vt->sqnorm(x, n);
}

void gemv(std::size_t m, std::size_t n, const double* A, const double* x, double* y,
          bool accumulate) {
    resolve_once();
    g_vt->gemv(m, n, A, x, y, accumulate);
}

void gemv_t(std::size_t m, std::size_t n, const double* A, const double* x, double* y,
            bool accumulate) {
    resolve_once();
    g_vt->gemv_t(m, n, A, x, y, accumulate);
}

void gemm_nn(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C, bool accumulate) {
    resolve_once();
    g_vt->gemm_nn(m, n, k, A, B, C, accumulate);
}

void gemm_nt(std::size_t m, std::size_t n, std::size_t k, const double* A, const double* B,
             double* C, bool accumulate) {
    resolve_once();
    g_vt->gemm_nt(m, n, k, A, B, C, accumulate);
}

void gemm_tn_acc(std::size_t m, std::size_t n, std::size_t rows, const double* A,
                 const double* B, double* C) {
    resolve_once();
    g_vt->gemm_tn_acc(m, n, rows, A, B, C);
}

}  // namespace wgf::kernels
