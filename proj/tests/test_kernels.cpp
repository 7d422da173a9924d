#include <doctest.h>

#include <random>

#include "mpcroute/kernels.hpp"

using namespace mpcroute;

namespace {

std::vector<u64> rand_u64(std::size_t n, std::mt19937_64& rng) {
    std::vector<u64> v(n);
    for (auto& x : v) x = rng();
    return v;
}

std::vector<double> rand_real(std::size_t n, std::mt19937_64& rng) {
    std::vector<double> v(n);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    for (auto& x : v) x = dist(rng);
    return v;
}

} // namespace

// The sizes cross the internal parallel cutoff and include ragged tails.
static const std::size_t kSizes[] = {1, 7, 64, 1000, 5000};

TEST_CASE("ring elementwise kernels: omp matches serial bit-for-bit") {
    std::mt19937_64 rng(1);
    for (const u64 mask : {~0ULL, (1ULL << 16) - 1}) {
        for (std::size_t n : kSizes) {
            const auto a = rand_u64(n, rng);
            const auto b = rand_u64(n, rng);
            std::vector<u64> s(n), p(n);
            kernels::ring_add_serial(a.data(), b.data(), s.data(), n, mask);
            kernels::ring_add_omp(a.data(), b.data(), p.data(), n, mask);
            CHECK(s == p);
            kernels::ring_sub_serial(a.data(), b.data(), s.data(), n, mask);
            kernels::ring_sub_omp(a.data(), b.data(), p.data(), n, mask);
            CHECK(s == p);
            kernels::ring_scale_serial(a.data(), b[0], s.data(), n, mask);
            kernels::ring_scale_omp(a.data(), b[0], p.data(), n, mask);
            CHECK(s == p);
        }
    }
}

TEST_CASE("beaver combine kernels: omp matches serial, lead and follower") {
    std::mt19937_64 rng(2);
    for (std::size_t n : kSizes) {
        const auto eps = rand_u64(n, rng), delta = rand_u64(n, rng);
        const auto a = rand_u64(n, rng), b = rand_u64(n, rng), c = rand_u64(n, rng);
        for (bool lead : {true, false}) {
            std::vector<u64> s(n), p(n);
            kernels::beaver_combine_serial(eps.data(), delta.data(), a.data(),
                                           b.data(), c.data(), lead, s.data(), n,
                                           ~0ULL);
            kernels::beaver_combine_omp(eps.data(), delta.data(), a.data(),
                                        b.data(), c.data(), lead, p.data(), n,
                                        ~0ULL);
            CHECK(s == p);
        }
    }
}

TEST_CASE("matmul-shaped combine: omp matches serial and a naive oracle") {
    std::mt19937_64 rng(3);
    const std::size_t n = 5, d = 9, m = 4;
    const std::size_t slots = n * d * m;
    const auto eps = rand_u64(slots, rng), delta = rand_u64(slots, rng);
    const auto a = rand_u64(slots, rng), b = rand_u64(slots, rng),
               c = rand_u64(slots, rng);
    std::vector<u64> s(n * m), p(n * m), naive(n * m, 0);
    kernels::beaver_matmul_combine_serial(eps.data(), delta.data(), a.data(),
                                          b.data(), c.data(), true, s.data(), n, d,
                                          m, ~0ULL);
    kernels::beaver_matmul_combine_omp(eps.data(), delta.data(), a.data(), b.data(),
                                       c.data(), true, p.data(), n, d, m, ~0ULL);
    for (std::size_t i = 0; i < n; i++)
        for (std::size_t j = 0; j < m; j++)
            for (std::size_t kk = 0; kk < d; kk++) {
                const std::size_t t = (i * d + kk) * m + j;
                naive[i * m + j] +=
                    c[t] + eps[t] * b[t] + delta[t] * a[t] + eps[t] * delta[t];
            }
    CHECK(s == p);
    CHECK(s == naive);
}

TEST_CASE("real matmuls: omp matches serial bit-for-bit, all variants") {
    std::mt19937_64 rng(4);
    const std::size_t n = 17, d = 23, m = 11;
    const auto A = rand_real(n * d, rng);
    const auto B = rand_real(d * m, rng);
    std::vector<double> s(n * m), p(n * m);
    kernels::matmul_nn_serial(A.data(), B.data(), s.data(), n, d, m);
    kernels::matmul_nn_omp(A.data(), B.data(), p.data(), n, d, m);
    CHECK(s == p);

    // naive oracle
    std::vector<double> naive(n * m, 0.0);
    for (std::size_t i = 0; i < n; i++)
        for (std::size_t j = 0; j < m; j++) {
            double acc = 0;
            for (std::size_t kk = 0; kk < d; kk++) acc += A[i * d + kk] * B[kk * m + j];
            naive[i * m + j] = acc;
        }
    CHECK(s == naive);

    // A^T * X where A is [n x d], X is [n x m]
    const auto X = rand_real(n * m, rng);
    std::vector<double> st(d * m), pt(d * m);
    kernels::matmul_tn_serial(A.data(), X.data(), st.data(), n, d, m);
    kernels::matmul_tn_omp(A.data(), X.data(), pt.data(), n, d, m);
    CHECK(st == pt);
    std::vector<double> naive_t(d * m, 0.0);
    for (std::size_t i = 0; i < d; i++)
        for (std::size_t j = 0; j < m; j++) {
            double acc = 0;
            for (std::size_t kk = 0; kk < n; kk++) acc += A[kk * d + i] * X[kk * m + j];
            naive_t[i * m + j] = acc;
        }
    CHECK(st == naive_t);

    // Y * B^T where Y is [n x m], B is [d x m]
    std::vector<double> sn(n * d), pn(n * d);
    kernels::matmul_nt_serial(X.data(), B.data(), sn.data(), n, m, d);
    kernels::matmul_nt_omp(X.data(), B.data(), pn.data(), n, m, d);
    CHECK(sn == pn);
    std::vector<double> naive_n(n * d, 0.0);
    for (std::size_t i = 0; i < n; i++)
        for (std::size_t j = 0; j < d; j++) {
            double acc = 0;
            for (std::size_t kk = 0; kk < m; kk++) acc += X[i * m + kk] * B[j * m + kk];
            naive_n[i * d + j] = acc;
        }
    CHECK(sn == naive_n);
}

TEST_CASE("execution mode dispatch") {
    const auto before = kernels::execution();
    kernels::set_execution(kernels::Exec::Serial);
    CHECK(kernels::execution() == kernels::Exec::Serial);
    kernels::set_execution(before);
}
