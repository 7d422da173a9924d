#include "mpcroute/kernels.hpp"

#include <atomic>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mpcroute::kernels {

namespace {
#ifdef _OPENMP
std::atomic<Exec> g_exec{Exec::Parallel};
#else
std::atomic<Exec> g_exec{Exec::Serial};
#endif

// Below this size the fork/join overhead dominates.
constexpr std::size_t kParallelCutoff = 4096;

inline bool go_parallel(std::size_t work) {
#ifdef _OPENMP
    return g_exec.load(std::memory_order_relaxed) == Exec::Parallel &&
           work >= kParallelCutoff;
#else
    (void)work;
    return false;
#endif
}
} // namespace

void set_execution(Exec e) { g_exec.store(e, std::memory_order_relaxed); }
Exec execution() { return g_exec.load(std::memory_order_relaxed); }

// ---- ring elementwise ----

void ring_add_serial(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask) {
    for (std::size_t i = 0; i < n; i++) out[i] = (a[i] + b[i]) & mask;
}

void ring_add_omp(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask) {
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; i++) out[i] = (a[i] + b[i]) & mask;
}

void ring_add(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask) {
    if (go_parallel(n)) ring_add_omp(a, b, out, n, mask);
    else ring_add_serial(a, b, out, n, mask);
}

void ring_sub_serial(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask) {
    for (std::size_t i = 0; i < n; i++) out[i] = (a[i] - b[i]) & mask;
}

void ring_sub_omp(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask) {
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; i++) out[i] = (a[i] - b[i]) & mask;
}

void ring_sub(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask) {
    if (go_parallel(n)) ring_sub_omp(a, b, out, n, mask);
    else ring_sub_serial(a, b, out, n, mask);
}

void ring_scale_serial(const u64* a, u64 s, u64* out, std::size_t n, u64 mask) {
    for (std::size_t i = 0; i < n; i++) out[i] = (a[i] * s) & mask;
}

void ring_scale_omp(const u64* a, u64 s, u64* out, std::size_t n, u64 mask) {
#pragma omp parallel for schedule(static)
    for (std::size_t i = 0; i < n; i++) out[i] = (a[i] * s) & mask;
}

void ring_scale(const u64* a, u64 s, u64* out, std::size_t n, u64 mask) {
    if (go_parallel(n)) ring_scale_omp(a, s, out, n, mask);
    else ring_scale_serial(a, s, out, n, mask);
}

// ---- beaver combines ----

namespace {
inline u64 combine_one(const u64* eps, const u64* delta, const u64* a,
                       const u64* b, const u64* c, bool lead, std::size_t t) {
    u64 z = c[t] + eps[t] * b[t] + delta[t] * a[t];
    if (lead) z += eps[t] * delta[t];
    return z;
}
} // namespace

void beaver_combine_serial(const u64* eps, const u64* delta, const u64* a,
                           const u64* b, const u64* c, bool lead, u64* z,
                           std::size_t n, u64 mask) {
    for (std::size_t t = 0; t < n; t++)
        z[t] = combine_one(eps, delta, a, b, c, lead, t) & mask;
}

void beaver_combine_omp(const u64* eps, const u64* delta, const u64* a,
                        const u64* b, const u64* c, bool lead, u64* z,
                        std::size_t n, u64 mask) {
#pragma omp parallel for schedule(static)
    for (std::size_t t = 0; t < n; t++)
        z[t] = combine_one(eps, delta, a, b, c, lead, t) & mask;
}

void beaver_combine(const u64* eps, const u64* delta, const u64* a,
                    const u64* b, const u64* c, bool lead, u64* z,
                    std::size_t n, u64 mask) {
    if (go_parallel(n)) beaver_combine_omp(eps, delta, a, b, c, lead, z, n, mask);
    else beaver_combine_serial(eps, delta, a, b, c, lead, z, n, mask);
}

void beaver_matmul_combine_serial(const u64* eps, const u64* delta,
                                  const u64* a, const u64* b, const u64* c,
                                  bool lead, u64* out, std::size_t n,
                                  std::size_t d, std::size_t m, u64 mask) {
    for (std::size_t i = 0; i < n; i++) {
        for (std::size_t j = 0; j < m; j++) {
            u64 acc = 0;
            for (std::size_t k = 0; k < d; k++) {
                const std::size_t t = (i * d + k) * m + j;
                acc += combine_one(eps, delta, a, b, c, lead, t);
            }
            out[i * m + j] = acc & mask;
        }
    }
}

void beaver_matmul_combine_omp(const u64* eps, const u64* delta, const u64* a,
                               const u64* b, const u64* c, bool lead, u64* out,
                               std::size_t n, std::size_t d, std::size_t m,
                               u64 mask) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t i = 0; i < n; i++) {
        for (std::size_t j = 0; j < m; j++) {
            u64 acc = 0;
            for (std::size_t k = 0; k < d; k++) {
                const std::size_t t = (i * d + k) * m + j;
                acc += combine_one(eps, delta, a, b, c, lead, t);
            }
            out[i * m + j] = acc & mask;
        }
    }
}

void beaver_matmul_combine(const u64* eps, const u64* delta, const u64* a,
                           const u64* b, const u64* c, bool lead, u64* out,
                           std::size_t n, std::size_t d, std::size_t m,
                           u64 mask) {
    if (go_parallel(n * d * m))
        beaver_matmul_combine_omp(eps, delta, a, b, c, lead, out, n, d, m, mask);
    else
        beaver_matmul_combine_serial(eps, delta, a, b, c, lead, out, n, d, m, mask);
}

// ---- real matmuls ----
// Each output element accumulates its inner product in fixed index order, so
// the parallel versions are bit-identical to the serial ones.

void matmul_nn_serial(const double* A, const double* B, double* C,
                      std::size_t n, std::size_t d, std::size_t m) {
    for (std::size_t i = 0; i < n; i++) {
        for (std::size_t j = 0; j < m; j++) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; k++) acc += A[i * d + k] * B[k * m + j];
            C[i * m + j] = acc;
        }
    }
}

void matmul_nn_omp(const double* A, const double* B, double* C, std::size_t n,
                   std::size_t d, std::size_t m) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t i = 0; i < n; i++) {
        for (std::size_t j = 0; j < m; j++) {
            double acc = 0.0;
            for (std::size_t k = 0; k < d; k++) acc += A[i * d + k] * B[k * m + j];
            C[i * m + j] = acc;
        }
    }
}

void matmul_nn(const double* A, const double* B, double* C, std::size_t n,
               std::size_t d, std::size_t m) {
    if (go_parallel(n * d * m)) matmul_nn_omp(A, B, C, n, d, m);
    else matmul_nn_serial(A, B, C, n, d, m);
}

void matmul_tn_serial(const double* A, const double* B, double* C,
                      std::size_t n, std::size_t d, std::size_t m) {
    for (std::size_t i = 0; i < d; i++) {
        for (std::size_t j = 0; j < m; j++) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; k++) acc += A[k * d + i] * B[k * m + j];
            C[i * m + j] = acc;
        }
    }
}

void matmul_tn_omp(const double* A, const double* B, double* C, std::size_t n,
                   std::size_t d, std::size_t m) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t i = 0; i < d; i++) {
        for (std::size_t j = 0; j < m; j++) {
            double acc = 0.0;
            for (std::size_t k = 0; k < n; k++) acc += A[k * d + i] * B[k * m + j];
            C[i * m + j] = acc;
        }
    }
}

void matmul_tn(const double* A, const double* B, double* C, std::size_t n,
               std::size_t d, std::size_t m) {
    if (go_parallel(n * d * m)) matmul_tn_omp(A, B, C, n, d, m);
    else matmul_tn_serial(A, B, C, n, d, m);
}

void matmul_nt_serial(const double* A, const double* B, double* C,
                      std::size_t n, std::size_t m, std::size_t d) {
    for (std::size_t i = 0; i < n; i++) {
        for (std::size_t j = 0; j < d; j++) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m; k++) acc += A[i * m + k] * B[j * m + k];
            C[i * d + j] = acc;
        }
    }
}

void matmul_nt_omp(const double* A, const double* B, double* C, std::size_t n,
                   std::size_t m, std::size_t d) {
#pragma omp parallel for collapse(2) schedule(static)
    for (std::size_t i = 0; i < n; i++) {
        for (std::size_t j = 0; j < d; j++) {
            double acc = 0.0;
            for (std::size_t k = 0; k < m; k++) acc += A[i * m + k] * B[j * m + k];
            C[i * d + j] = acc;
        }
    }
}

void matmul_nt(const double* A, const double* B, double* C, std::size_t n,
               std::size_t m, std::size_t d) {
    if (go_parallel(n * m * d)) matmul_nt_omp(A, B, C, n, m, d);
    else matmul_nt_serial(A, B, C, n, m, d);
}

} // namespace mpcroute::kernels
