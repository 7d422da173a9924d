#pragma once

#include <cstddef>

#include "mpcroute/ring.hpp"

// Data-parallel inner loops, each in a serial reference version and an
// OpenMP version. The serial versions are kept as the oracle for the
// parallel ones: ring arithmetic is exact, and the real-valued kernels fix
// the inner accumulation order per output element, so both versions must
// agree bit-for-bit at any thread count.
namespace mpcroute::kernels {

enum class Exec { Serial, Parallel };

void set_execution(Exec e);
Exec execution();

// ---- ring kernels (elementwise, masked mod 2^bits) ----

void ring_add_serial(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask);
void ring_add_omp(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask);
void ring_add(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask);

void ring_sub_serial(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask);
void ring_sub_omp(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask);
void ring_sub(const u64* a, const u64* b, u64* out, std::size_t n, u64 mask);

void ring_scale_serial(const u64* a, u64 s, u64* out, std::size_t n, u64 mask);
void ring_scale_omp(const u64* a, u64 s, u64* out, std::size_t n, u64 mask);
void ring_scale(const u64* a, u64 s, u64* out, std::size_t n, u64 mask);

// z_t = c_t + eps_t*b_t + delta_t*a_t (+ eps_t*delta_t when lead), one
// consumed triple per slot t. Elementwise Beaver combine.
void beaver_combine_serial(const u64* eps, const u64* delta, const u64* a,
                           const u64* b, const u64* c, bool lead, u64* z,
                           std::size_t n, u64 mask);
void beaver_combine_omp(const u64* eps, const u64* delta, const u64* a,
                        const u64* b, const u64* c, bool lead, u64* z,
                        std::size_t n, u64 mask);
void beaver_combine(const u64* eps, const u64* delta, const u64* a,
                    const u64* b, const u64* c, bool lead, u64* z,
                    std::size_t n, u64 mask);

// Matmul-shaped Beaver combine: slot t = (i*d + k)*m + j holds the triple
// and opened masks for the scalar product x[i][k]*y[k][j];
// out[i][j] = sum_k combine(t). Parallel over (i, j), inner k serial.
void beaver_matmul_combine_serial(const u64* eps, const u64* delta,
                                  const u64* a, const u64* b, const u64* c,
                                  bool lead, u64* out, std::size_t n,
                                  std::size_t d, std::size_t m, u64 mask);
void beaver_matmul_combine_omp(const u64* eps, const u64* delta, const u64* a,
                               const u64* b, const u64* c, bool lead, u64* out,
                               std::size_t n, std::size_t d, std::size_t m,
                               u64 mask);
void beaver_matmul_combine(const u64* eps, const u64* delta, const u64* a,
                           const u64* b, const u64* c, bool lead, u64* out,
                           std::size_t n, std::size_t d, std::size_t m,
                           u64 mask);

// ---- real kernels (row-major doubles) ----

// C[n x m] = A[n x d] * B[d x m]
void matmul_nn_serial(const double* A, const double* B, double* C,
                      std::size_t n, std::size_t d, std::size_t m);
void matmul_nn_omp(const double* A, const double* B, double* C, std::size_t n,
                   std::size_t d, std::size_t m);
void matmul_nn(const double* A, const double* B, double* C, std::size_t n,
               std::size_t d, std::size_t m);

// C[d x m] = A^T[d x n] * B[n x m]  with A stored [n x d]
void matmul_tn_serial(const double* A, const double* B, double* C,
                      std::size_t n, std::size_t d, std::size_t m);
void matmul_tn_omp(const double* A, const double* B, double* C, std::size_t n,
                   std::size_t d, std::size_t m);
void matmul_tn(const double* A, const double* B, double* C, std::size_t n,
               std::size_t d, std::size_t m);

// C[n x d] = A[n x m] * B^T[m x d]  with B stored [d x m]
void matmul_nt_serial(const double* A, const double* B, double* C,
                      std::size_t n, std::size_t m, std::size_t d);
void matmul_nt_omp(const double* A, const double* B, double* C, std::size_t n,
                   std::size_t m, std::size_t d);
void matmul_nt(const double* A, const double* B, double* C, std::size_t n,
               std::size_t m, std::size_t d);

} // namespace mpcroute::kernels
