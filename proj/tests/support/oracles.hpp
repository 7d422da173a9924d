#pragma once

// Independent reference computations used as test oracles. These stay
// deliberately separate from the library's own code paths: the big-integer
// codec oracle uses __int128 arithmetic, and the routed-pipeline oracle
// re-derives the fixed-point forward pass from the ring primitives alone.

#include <cmath>
#include <span>
#include <vector>

#include "mpcroute/modelpool.hpp"

namespace mpcroute::test {

// round(x * 2^f) mod 2^64 via 128-bit integer arithmetic,
// half-away-from-zero.
inline u64 bigint_encode(double x, int frac_bits, unsigned ring_bits = 64) {
    const long double scaled = std::ldexp(static_cast<long double>(x), frac_bits);
    const long double r = std::roundl(scaled);
    __int128 v = static_cast<__int128>(r);
    const u64 mask = ring_bits == 64 ? ~0ULL : ((1ULL << ring_bits) - 1);
    return static_cast<u64>(static_cast<unsigned __int128>(v)) & mask;
}

// arithmetic shift on the signed value, big-int route
inline u64 bigint_truncate(u64 r, int f, unsigned ring_bits = 64) {
    __int128 s;
    if (ring_bits == 64) {
        s = static_cast<i64>(r);
    } else {
        const u64 mask = (1ULL << ring_bits) - 1;
        u64 v = r & mask;
        if (v >> (ring_bits - 1)) s = static_cast<i64>(v | ~mask);
        else s = static_cast<i64>(v);
    }
    s >>= f;
    const u64 mask = ring_bits == 64 ? ~0ULL : ((1ULL << ring_bits) - 1);
    return static_cast<u64>(static_cast<unsigned __int128>(s)) & mask;
}

// ---- plaintext fixed-point routed pipeline, re-derived ----

inline std::vector<u64> oracle_mlp_forward(std::span<const u64> input,
                                           std::span<const u64> params,
                                           std::span<const std::size_t> dims,
                                           int frac_bits) {
    std::vector<u64> act(input.begin(), input.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < dims.size(); l++) {
        const std::size_t in = dims[l], out = dims[l + 1];
        std::vector<u64> next(out);
        for (std::size_t j = 0; j < out; j++) {
            u64 acc = 0;
            for (std::size_t i = 0; i < in; i++)
                acc += act[i] * params[off + i * out + j]; // wraps mod 2^64
            acc = bigint_truncate(acc, frac_bits);
            next[j] = acc + params[off + in * out + j];
        }
        off += in * out + out;
        if (l + 2 < dims.size())
            for (auto& v : next)
                if (static_cast<i64>(v) < 0) v = 0;
        act = std::move(next);
    }
    return act;
}

inline std::size_t oracle_argmax(std::span<const u64> v) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); i++)
        if (static_cast<i64>(v[i]) > static_cast<i64>(v[best])) best = i;
    return best;
}

struct OracleRouted {
    std::size_t selected = 0;
    std::vector<u64> logits;
    int label = 0;
};

inline OracleRouted oracle_routed_forward(const ModelPool& pool,
                                          const RouterPolicy& router,
                                          std::span<const u64> embedding) {
    const int f = pool.frac_bits;
    // summary mean-pool
    std::vector<u64> summary(pool.embed_dim, 0);
    for (std::size_t s = 0; s < pool.seq_len; s++)
        for (std::size_t j = 0; j < pool.embed_dim; j++)
            summary[j] += embedding[s * pool.embed_dim + j];
    if (pool.seq_len > 1) {
        const u64 inv = bigint_encode(1.0 / static_cast<double>(pool.seq_len), f);
        for (auto& v : summary) v = bigint_truncate(v * inv, f);
    }
    const auto rdims = router.layer_dims();
    OracleRouted out;
    const auto logits = oracle_mlp_forward(summary, router.blob, rdims, f);
    out.selected = oracle_argmax(logits);
    const auto edims = pool.experts[out.selected].layer_dims();
    out.logits = oracle_mlp_forward(embedding, pool.blobs[out.selected], edims, f);
    out.label = static_cast<int>(oracle_argmax(out.logits));
    return out;
}

} // namespace mpcroute::test
