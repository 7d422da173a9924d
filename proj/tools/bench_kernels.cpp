// Serial vs OpenMP timing for the data-parallel kernels.

#include <chrono>
#include <cstdio>
#include <functional>
#include <random>
#include <vector>

#include "mpcroute/kernels.hpp"

using namespace mpcroute;

namespace {

double time_of(int reps, const std::function<void()>& fn) {
    // one warmup, then best of reps
    fn();
    double best = 1e30;
    for (int r = 0; r < reps; r++) {
        const auto t0 = std::chrono::steady_clock::now();
        fn();
        const double dt =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count();
        best = std::min(best, dt);
    }
    return best;
}

void report(const char* name, double serial, double parallel) {
    std::printf("%-24s serial %10.6fs   omp %10.6fs   speedup %5.2fx\n", name,
                serial, parallel, serial / parallel);
}

} // namespace

int main(int argc, char** argv) {
    std::size_t n = argc > 1 ? std::strtoull(argv[1], nullptr, 10) : 1u << 22;
    const int reps = 5;
    std::mt19937_64 rng(1);

    std::vector<u64> a(n), b(n), out(n);
    for (auto& v : a) v = rng();
    for (auto& v : b) v = rng();

    report("ring_add",
           time_of(reps, [&] { kernels::ring_add_serial(a.data(), b.data(), out.data(), n, ~0ULL); }),
           time_of(reps, [&] { kernels::ring_add_omp(a.data(), b.data(), out.data(), n, ~0ULL); }));

    std::vector<u64> eps(n), delta(n), ta(n), tb(n), tc(n);
    for (auto& v : eps) v = rng();
    for (auto& v : delta) v = rng();
    for (auto& v : ta) v = rng();
    for (auto& v : tb) v = rng();
    for (auto& v : tc) v = rng();
    report("beaver_combine",
           time_of(reps, [&] {
               kernels::beaver_combine_serial(eps.data(), delta.data(), ta.data(),
                                              tb.data(), tc.data(), true,
                                              out.data(), n, ~0ULL);
           }),
           time_of(reps, [&] {
               kernels::beaver_combine_omp(eps.data(), delta.data(), ta.data(),
                                           tb.data(), tc.data(), true, out.data(),
                                           n, ~0ULL);
           }));

    // matmul-shaped combine, 64 x 64 x 64 slots scaled to ~n
    std::size_t dim = 16;
    while (dim * dim * dim * 8 < n) dim *= 2;
    const std::size_t slots = dim * dim * dim;
    eps.resize(slots);
    delta.resize(slots);
    ta.resize(slots);
    tb.resize(slots);
    tc.resize(slots);
    out.resize(dim * dim);
    report("beaver_matmul_combine",
           time_of(reps, [&] {
               kernels::beaver_matmul_combine_serial(eps.data(), delta.data(),
                                                     ta.data(), tb.data(), tc.data(),
                                                     true, out.data(), dim, dim, dim,
                                                     ~0ULL);
           }),
           time_of(reps, [&] {
               kernels::beaver_matmul_combine_omp(eps.data(), delta.data(),
                                                  ta.data(), tb.data(), tc.data(),
                                                  true, out.data(), dim, dim, dim,
                                                  ~0ULL);
           }));

    std::vector<double> A(dim * dim), B(dim * dim), C(dim * dim);
    std::uniform_real_distribution<double> dist(-1, 1);
    for (auto& v : A) v = dist(rng);
    for (auto& v : B) v = dist(rng);
    report("matmul_nn",
           time_of(reps, [&] {
               kernels::matmul_nn_serial(A.data(), B.data(), C.data(), dim, dim, dim);
           }),
           time_of(reps, [&] {
               kernels::matmul_nn_omp(A.data(), B.data(), C.data(), dim, dim, dim);
           }));
    report("matmul_tn",
           time_of(reps, [&] {
               kernels::matmul_tn_serial(A.data(), B.data(), C.data(), dim, dim, dim);
           }),
           time_of(reps, [&] {
               kernels::matmul_tn_omp(A.data(), B.data(), C.data(), dim, dim, dim);
           }));
    return 0;
}
