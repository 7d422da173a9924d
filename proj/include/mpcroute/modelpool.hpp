#pragma once

#include <array>
#include <filesystem>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "mpcroute/ring.hpp"
#include "mpcroute/sharing.hpp"

namespace mpcroute {

// Architecture and MPC cost of one expert MLP.
struct ExpertSpec {
    std::string name;
    std::size_t input_dim = 0;
    std::vector<std::size_t> hidden;
    std::size_t classes = 0;
    double cost = 1.0; // MPC cost units (measured wall time or configured)

    std::vector<std::size_t> layer_dims() const;
    std::size_t param_count() const;
    void validate() const;
};

// Deployable quantized pool: specs plus fixed-point parameter blobs
// (layer-major, W then bias per layer).
struct ModelPool {
    std::size_t seq_len = 1;
    std::size_t embed_dim = 0;
    std::size_t classes = 0;
    int frac_bits = 16;
    std::vector<ExpertSpec> experts;
    std::vector<std::vector<u64>> blobs;

    std::size_t k() const { return experts.size(); }
    std::vector<double> costs() const;
    std::size_t baseline_index() const; // largest expert (max params, ties -> last)
    // Uniform execution shape for oblivious mode: max width per layer
    // position. Requires all experts to share the same depth.
    std::vector<std::size_t> padded_layer_dims() const;
    void validate() const;
};

// Quantized two-layer router: summary mean-pool dimension, hidden width,
// pool size, flat blob laid out like an MLP with dims {summary, hidden, k}.
struct RouterPolicy {
    std::size_t summary_dim = 0;
    std::size_t hidden = 0;
    std::size_t k = 0;
    int frac_bits = 16;
    std::vector<u64> blob;

    std::vector<std::size_t> layer_dims() const { return {summary_dim, hidden, k}; }
    std::size_t param_count() const;
    void validate() const;
};

// ---- quantization ----

struct QuantResult {
    std::vector<u64> data;
    double max_error = 0.0;
};

QuantResult quantize(std::span<const double> weights, const FixedPointCodec& codec);
std::vector<double> dequantize(std::span<const u64> blob, const FixedPointCodec& codec);

// Assembles a deployable pool from real weights (quantizing them).
ModelPool build_pool(std::size_t seq_len, std::size_t embed_dim,
                     std::size_t classes, int frac_bits,
                     std::vector<ExpertSpec> experts,
                     const std::vector<std::vector<double>>& real_params);
RouterPolicy build_router(std::size_t summary_dim, std::size_t hidden,
                          std::size_t k, int frac_bits,
                          std::span<const double> real_flat);

// ---- files ----
// JSON manifest naming experts, widths, costs and frac_bits, next to a binary
// blob file: magic "SRPOOL", version, tensors in the wire format. Share files
// use magic "SRSHRE" plus a party id byte.

void save_pool(const ModelPool& pool, const std::filesystem::path& json_path);
ModelPool load_pool(const std::filesystem::path& json_path);
void save_router(const RouterPolicy& router, const std::filesystem::path& json_path);
RouterPolicy load_router(const std::filesystem::path& json_path);

std::vector<u8> pool_blob_bytes(const ModelPool& pool);
std::vector<u8> router_blob_bytes(const RouterPolicy& router);

// One party's halves of every artifact parameter, plus provenance hashes of
// the plaintext blobs (used in the protocol handshake).
struct PartyArtifacts {
    int party = 0;
    ModelPool pool;      // blobs hold this party's shares
    RouterPolicy router; // blob holds this party's share
    std::array<u8, 32> pool_hash{};
    std::array<u8, 32> router_hash{};
};

std::pair<PartyArtifacts, PartyArtifacts>
secret_share_pool(const ModelPool& pool, const RouterPolicy& router,
                  std::mt19937_64& rng);

void save_party_artifacts(const PartyArtifacts& arts,
                          const std::filesystem::path& pool_json,
                          const std::filesystem::path& router_json);
PartyArtifacts load_party_artifacts(const std::filesystem::path& pool_json,
                                    const std::filesystem::path& router_json);

// Expert share blobs re-laid into the padded uniform shape, one row per
// expert, zero-filled padding; rows reconstruct to the padded parameters.
SharedTensor build_padded_pool_matrix(const PartyArtifacts& arts);
// Zero-padding relayout of one plaintext/share blob (also used by oracles).
std::vector<u64> pad_expert_blob(std::span<const u64> blob,
                                 std::span<const std::size_t> actual_dims,
                                 std::span<const std::size_t> padded_dims);

// ---- plain fixed-point reference pipeline ----
// Mirrors the MPC pipeline step for step in plaintext ring arithmetic
// (exact truncation). Used by experiments and the demo.

struct PlainRouted {
    std::size_t selected = 0;
    std::vector<u64> logits_raw;
    std::vector<double> logits;
    int label = 0;
};

std::vector<u64> plain_mlp_forward(std::span<const u64> input,
                                   std::span<const u64> params,
                                   std::span<const std::size_t> layer_dims,
                                   const FixedPointCodec& codec);
std::vector<u64> plain_summary(std::span<const u64> embedding, std::size_t seq_len,
                               std::size_t embed_dim, const FixedPointCodec& codec);
std::size_t plain_argmax_signed(std::span<const u64> v, Ring ring);
PlainRouted plain_routed_forward(const ModelPool& pool, const RouterPolicy& router,
                                 std::span<const u64> embedding);

// Seeded demo artifacts so the CLI runs without a training step.
std::pair<ModelPool, RouterPolicy> make_demo_artifacts(std::size_t k, u64 seed);

} // namespace mpcroute
