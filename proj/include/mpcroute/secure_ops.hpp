#pragma once

#include <span>
#include <vector>

#include "mpcroute/sharing.hpp"

namespace mpcroute {

// Per-party protocol context: one transport, one triple stream, strictly
// sequential use.
struct SecureContext {
    int party = 0;
    Ring ring;
    int frac_bits = 16;
    Transport* net = nullptr;
    TripleSource* triples = nullptr;

    FixedPointCodec codec() const { return FixedPointCodec{ring, frac_bits}; }
};

// XOR-shared bit decomposition of one ring element (spec-facing scalar view).
struct BitSharedVector {
    int party = 0;
    std::vector<u8> bits; // length = ring bit-width, LSB first
};

// Batched bit-plane form: plane p, word w at words[p*W + w], W = ceil(n/64).
// XOR of the parties' planes is the bit decomposition of each element.
struct BitPlanes {
    int party = 0;
    std::size_t n = 0;
    unsigned bits = 0;
    std::vector<u64> words;

    std::size_t words_per_plane() const { return (n + 63) / 64; }
    std::span<const u64> plane(unsigned p) const {
        return {words.data() + p * words_per_plane(), words_per_plane()};
    }
};

// Round costs of the bit-level protocols, asserted against the transport
// round counter in tests.
constexpr u64 a2b_rounds(unsigned bits) { return bits; }
constexpr u64 drelu_rounds(unsigned bits) { return bits + 1; }
constexpr u64 relu_rounds(unsigned bits) { return bits + 2; }
constexpr u64 argmax_rounds(unsigned bits, std::size_t k) {
    return (k - 1) * (drelu_rounds(bits) + 2);
}

// Arithmetic-to-boolean conversion: the parties' share bit decompositions are
// added in a ripple-carry adder over XOR shares (AND gates via boolean
// triples). Exactly a2b_rounds(bits) communication rounds.
BitPlanes a2b_tensor(SecureContext& ctx, const SharedTensor& x);
BitSharedVector a2b(SecureContext& ctx, const SharedTensor& x_scalar);

// 1{x >= 0} as integer shares (scale 0); zero counts as non-negative.
SharedTensor drelu(SecureContext& ctx, const SharedTensor& x);

// x * drelu(x), scale preserved.
SharedTensor relu(SecureContext& ctx, const SharedTensor& x);

// x [n x d] * W [d x m] + b [m], one truncation after the product; output at
// the input scale. One communication round for the batched Beaver opens.
SharedTensor secure_linear(SecureContext& ctx, const SharedTensor& x,
                           const SharedTensor& W, const SharedTensor& b);

// Linear scan argmax returning integer shares of a one-hot vector of length
// k. Ties break toward the lowest index (strict inequality to replace).
SharedTensor secure_argmax(SecureContext& ctx, const SharedTensor& v);

// sum_i sel_i * pool_row_i. Transcript length depends only on (k, P), never
// on the selected index.
SharedTensor oblivious_select(SecureContext& ctx, const SharedTensor& sel,
                              const SharedTensor& pool);

// MPC forward pass of an MLP: alternating linear layers and ReLU, layer
// widths given as [input, hidden..., classes]. params is the flattened
// layer-major (W then bias per layer) parameter vector.
SharedTensor secure_expert_forward(SecureContext& ctx, const SharedTensor& x,
                                   const SharedTensor& params,
                                   std::span<const std::size_t> layer_dims);

// Reveals the selection index to both servers (revealed mode only).
std::size_t open_index(SecureContext& ctx, const SharedTensor& onehot);

std::size_t mlp_param_count(std::span<const std::size_t> layer_dims);

} // namespace mpcroute
