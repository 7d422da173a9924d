#pragma once

#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "mpcroute/ring.hpp"
#include "mpcroute/transport.hpp"

namespace mpcroute {

// One party's additive share of a scalar.
struct Share {
    int party = 0;
    u64 value = 0;
    int scale = 0;
};

// One party's additive share of a tensor. Both parties' tensors for one
// logical value always carry identical shape and scale.
struct SharedTensor {
    int party = 0;
    std::vector<std::size_t> shape;
    int scale = 0;
    std::vector<u64> data;

    std::size_t numel() const {
        std::size_t n = 1;
        for (auto d : shape) n *= d;
        return n;
    }
    static SharedTensor zeros(int party, std::vector<std::size_t> shape, int scale);
};

struct BeaverTripleShare {
    u64 a = 0, b = 0, c = 0;
};

// Single-use wrapper for the scalar multiply entry point; reuse is a hard
// protocol error.
struct BeaverTriple {
    BeaverTripleShare share;
    bool consumed = false;
};

// XOR shares of a, b and c = a AND b, one bit each.
struct BoolTripleShare {
    u8 a = 0, b = 0, c = 0;
};

struct DealerOutput {
    std::array<std::vector<BeaverTripleShare>, 2> arith;
    std::array<std::vector<BoolTripleShare>, 2> boolean;
};

// Correlated randomness. Pure function of the rng state: every arithmetic
// triple satisfies c = a*b in the ring, every boolean one c = a AND b.
DealerOutput dealer_generate(std::size_t n_arith, std::size_t n_bool,
                             std::mt19937_64& rng, Ring ring = Ring{});

// Per-party file: magic "SRTRIP", version byte, counts as 8-byte LE, then
// arithmetic triples as 3x8-byte LE, then boolean triples as 3x1-byte.
void write_triple_file(const std::filesystem::path& path,
                       std::span<const BeaverTripleShare> arith,
                       std::span<const BoolTripleShare> boolean);
std::pair<std::vector<BeaverTripleShare>, std::vector<BoolTripleShare>>
read_triple_file(const std::filesystem::path& path);

// Stream of single-use triples. Consumption counters are the honest cost
// signal reported by the profiler.
class TripleSource {
public:
    virtual ~TripleSource() = default;
    virtual void next_arith(std::size_t n, BeaverTripleShare* out) = 0;
    virtual void next_bool(std::size_t n, BoolTripleShare* out) = 0;

    BeaverTripleShare next_arith() {
        BeaverTripleShare t;
        next_arith(1, &t);
        return t;
    }

    std::size_t arith_consumed() const { return arith_used_; }
    std::size_t bool_consumed() const { return bool_used_; }

protected:
    std::size_t arith_used_ = 0;
    std::size_t bool_used_ = 0;
};

// Expands the dealer stream from a seed and keeps this party's half. Both
// parties construct it with the same seed; generation order is identical to
// dealer_generate so file-based and seeded runs line up.
class SeededTripleSource final : public TripleSource {
public:
    SeededTripleSource(u64 seed, int party, Ring ring = Ring{})
        : rng_(seed), party_(party), ring_(ring) {}

    void next_arith(std::size_t n, BeaverTripleShare* out) override;
    void next_bool(std::size_t n, BoolTripleShare* out) override;

private:
    std::mt19937_64 rng_;
    int party_;
    Ring ring_;
};

// Fixed pools, e.g. loaded from a dealer file. Exhaustion is a protocol error.
class VectorTripleSource final : public TripleSource {
public:
    VectorTripleSource(std::vector<BeaverTripleShare> arith,
                       std::vector<BoolTripleShare> boolean)
        : arith_(std::move(arith)), bool_(std::move(boolean)) {}

    void next_arith(std::size_t n, BeaverTripleShare* out) override;
    void next_bool(std::size_t n, BoolTripleShare* out) override;

private:
    std::vector<BeaverTripleShare> arith_;
    std::vector<BoolTripleShare> bool_;
    std::size_t arith_pos_ = 0;
    std::size_t bool_pos_ = 0;
};

// ---- share / reconstruct ----

std::pair<Share, Share> share(u64 x, int scale, std::mt19937_64& rng,
                              Ring ring = Ring{});
u64 reconstruct(const Share& s0, const Share& s1, Ring ring = Ring{});

std::pair<SharedTensor, SharedTensor> share_tensor(std::span<const u64> values,
                                                   std::vector<std::size_t> shape,
                                                   int scale, std::mt19937_64& rng,
                                                   Ring ring = Ring{});
std::vector<u64> reconstruct_tensor(const SharedTensor& s0, const SharedTensor& s1,
                                    Ring ring = Ring{});

// ---- local linear algebra on shares (no communication) ----

SharedTensor add_local(const SharedTensor& x, const SharedTensor& y,
                       Ring ring = Ring{});
SharedTensor sub_local(const SharedTensor& x, const SharedTensor& y,
                       Ring ring = Ring{});
SharedTensor neg_local(const SharedTensor& x, Ring ring = Ring{});
// Public constants enter as party 0's addend.
SharedTensor add_public(const SharedTensor& x, std::span<const u64> consts,
                        Ring ring = Ring{});
// Both parties scale their share by the public ring element; the caller
// accounts for the scale the constant was encoded at.
SharedTensor scale_public(const SharedTensor& x, u64 c, int c_scale,
                          Ring ring = Ring{});

// ---- interactive ops ----

// Single-triple scalar multiply; the triple is marked consumed.
Share beaver_mul_scalar(const Share& x, const Share& y, BeaverTriple& t,
                        Transport& net, int party, Ring ring = Ring{});

// Elementwise product; one triple per element, one batched open round.
SharedTensor beaver_mul(const SharedTensor& x, const SharedTensor& y,
                        TripleSource& triples, Transport& net,
                        Ring ring = Ring{});

// x [n x d] * y [d x m]; one triple per scalar multiply-accumulate, one
// batched open round.
SharedTensor beaver_matmul(const SharedTensor& x, const SharedTensor& y,
                           TripleSource& triples, Transport& net,
                           Ring ring = Ring{});

// Share-local probabilistic truncation by f fractional bits: party 0 floors,
// party 1 negates-floors-negates. Within 1 ulp of the plain truncation except
// with probability about |v| / 2^(bits-1).
SharedTensor truncate_shares(const SharedTensor& x, int f, Ring ring = Ring{});

// ---- wire format ----
// [ndim:1][dims:8 LE each][scale:1][row-major 8-byte LE elements]
std::vector<u8> serialize_tensor(const SharedTensor& t);
SharedTensor parse_tensor(std::span<const u8> bytes, int party);

} // namespace mpcroute
