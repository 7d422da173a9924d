#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "mpcroute/modelpool.hpp"
#include "mpcroute/secure_ops.hpp"

namespace mpcroute {

constexpr u8 kProtocolVersion = 1;

// revealed: the selection index is opened to the servers and the chosen
// heterogeneous expert runs. oblivious: parameters are selected via the
// shared one-hot inner product against the zero-padded uniform pool, so the
// transcript is independent of the choice.
enum class ExecMode : u8 { Revealed = 0, Oblivious = 1 };

ExecMode exec_mode_from_string(const std::string& s);
std::string to_string(ExecMode m);

// ---- client side ----

struct ClientResult {
    std::vector<u64> logits_raw;
    std::vector<double> logits;
    int label = 0;
};

// Encodes the embedding at the codec scale and splits it into two additive
// shares, one wire tensor per party.
std::pair<SharedTensor, SharedTensor>
client_prepare(std::span<const double> embedding, std::size_t seq_len,
               std::size_t embed_dim, int frac_bits, std::mt19937_64& rng);

// Reconstructs, decodes and takes the lowest-index argmax.
ClientResult client_finish(const SharedTensor& y0, const SharedTensor& y1,
                           int frac_bits);

// ---- server side ----

struct PartyRunResult {
    CommStats stats;
    std::size_t arith_consumed = 0;
    std::size_t bool_consumed = 0;
    std::vector<std::size_t> selections; // revealed mode only
    std::array<u8, 32> peer_transcript{};
    std::array<u8, 32> client_transcript{};
};

// Serves inferences until the client count is exhausted: handshake with the
// peer (version/mode/pool-hash/router-hash), client hello, then per sample
// router -> argmax -> retrieval -> expert with per-phase accounting.
PartyRunResult run_party(const PartyArtifacts& arts, ExecMode mode,
                         Transport& peer, Transport& client,
                         TripleSource& triples);

// ---- client worker ----

struct ClientRunResult {
    std::vector<ClientResult> results;
    std::array<u8, 32> p0_transcript{};
    std::array<u8, 32> p1_transcript{};
    StatCounters stats0, stats1;
};

ClientRunResult run_client(std::span<const std::vector<double>> samples,
                           std::size_t seq_len, std::size_t embed_dim,
                           int frac_bits, ExecMode mode, u64 share_seed,
                           Transport& p0, Transport& p1);

// ---- in-process simulation (client + both parties over local channels) ----

struct SimulateReport {
    ExecMode mode = ExecMode::Revealed;
    std::vector<int> labels;
    std::vector<std::vector<double>> logits;
    std::vector<std::size_t> selections; // revealed mode only
    CommStats party0, party1;
    std::size_t arith0 = 0, bool0 = 0, arith1 = 0, bool1 = 0;
    std::string transcript01; // party0 -> peer transcript digest (hex)
    std::string transcript10;
    std::string transcript_c0, transcript_c1;
    double seconds = 0; // wall time; excluded from determinism checks
};

SimulateReport simulate(const ModelPool& pool, const RouterPolicy& router,
                        std::span<const std::vector<double>> samples,
                        ExecMode mode, u64 seed);

// ---- dealer sizing ----

struct TripleBudget {
    std::size_t arith = 0;
    std::size_t boolean = 0;
};

TripleBudget estimate_inference_budget(const ModelPool& pool,
                                       const RouterPolicy& router, ExecMode mode,
                                       unsigned ring_bits = 64);

} // namespace mpcroute
