#include "mpcroute/protocol.hpp"

#include <chrono>
#include <thread>

#include "mpcroute/errors.hpp"

namespace mpcroute {

ExecMode exec_mode_from_string(const std::string& s) {
    if (s == "revealed") return ExecMode::Revealed;
    if (s == "oblivious") return ExecMode::Oblivious;
    throw std::invalid_argument("unknown mode '" + s + "'");
}

std::string to_string(ExecMode m) {
    return m == ExecMode::Revealed ? "revealed" : "oblivious";
}

// ---- client side ----

std::pair<SharedTensor, SharedTensor>
client_prepare(std::span<const double> embedding, std::size_t seq_len,
               std::size_t embed_dim, int frac_bits, std::mt19937_64& rng) {
    if (embedding.size() != seq_len * embed_dim)
        throw std::invalid_argument("client_prepare: embedding size mismatch");
    const FixedPointCodec codec{Ring{}, frac_bits};
    std::vector<u64> enc(embedding.size());
    for (std::size_t i = 0; i < enc.size(); i++) enc[i] = codec.encode(embedding[i]);
    return share_tensor(enc, {seq_len, embed_dim}, frac_bits, rng);
}

ClientResult client_finish(const SharedTensor& y0, const SharedTensor& y1,
                           int frac_bits) {
    const FixedPointCodec codec{Ring{}, frac_bits};
    ClientResult out;
    out.logits_raw = reconstruct_tensor(y0, y1);
    out.logits = dequantize(out.logits_raw, codec);
    out.label = static_cast<int>(plain_argmax_signed(out.logits_raw, codec.ring));
    return out;
}

// ---- handshake frames ----

namespace {

std::vector<u8> handshake_frame(ExecMode mode, const PartyArtifacts& arts) {
    std::vector<u8> f;
    f.push_back(kProtocolVersion);
    f.push_back(static_cast<u8>(mode));
    f.insert(f.end(), arts.pool_hash.begin(), arts.pool_hash.end());
    f.insert(f.end(), arts.router_hash.begin(), arts.router_hash.end());
    return f;
}

struct ClientHello {
    u8 version = kProtocolVersion;
    u8 mode = 0;
    u64 samples = 0;
    u64 seq_len = 0;
    u64 embed_dim = 0;
    u8 frac_bits = 16;
};

std::vector<u8> hello_frame(const ClientHello& h) {
    std::vector<u8> f;
    f.push_back(h.version);
    f.push_back(h.mode);
    put_u64(f, h.samples);
    put_u64(f, h.seq_len);
    put_u64(f, h.embed_dim);
    f.push_back(h.frac_bits);
    return f;
}

ClientHello parse_hello(std::span<const u8> f) {
    if (f.size() != 27) throw ProtocolError("bad hello frame length");
    ClientHello h;
    h.version = f[0];
    h.mode = f[1];
    h.samples = get_u64(f.data() + 2);
    h.seq_len = get_u64(f.data() + 10);
    h.embed_dim = get_u64(f.data() + 18);
    h.frac_bits = f[26];
    return h;
}

// One routed inference over shared state. Phase deltas are attributed by
// the caller via the transports' take_delta marks.
SharedTensor run_inference(SecureContext& ctx, const PartyArtifacts& arts,
                           const SharedTensor& e_share, ExecMode mode,
                           const SharedTensor& padded_pool,
                           const std::vector<std::size_t>& padded_dims,
                           CommStats& stats, Transport& peer,
                           std::vector<std::size_t>* selections) {
    const std::size_t seq = arts.pool.seq_len;
    const std::size_t dim = arts.pool.embed_dim;
    const FixedPointCodec codec = ctx.codec();

    // summary: mean over sequence rows, local
    SharedTensor summary = SharedTensor::zeros(ctx.party, {1, dim}, e_share.scale);
    for (std::size_t s = 0; s < seq; s++)
        for (std::size_t j = 0; j < dim; j++)
            summary.data[j] = ctx.ring.add(summary.data[j], e_share.data[s * dim + j]);
    if (seq > 1) {
        const u64 inv = codec.encode(1.0 / static_cast<double>(seq));
        summary = scale_public(summary, inv, codec.frac_bits, ctx.ring);
        summary = truncate_shares(summary, codec.frac_bits, ctx.ring);
    }

    // router: two-layer net over the summary
    SharedTensor router_params;
    router_params.party = ctx.party;
    router_params.scale = arts.router.frac_bits;
    router_params.shape = {arts.router.blob.size()};
    router_params.data = arts.router.blob;
    const auto rdims = arts.router.layer_dims();
    SharedTensor logits = secure_expert_forward(ctx, summary, router_params, rdims);
    stats.attribute("router", peer.take_delta());

    SharedTensor onehot = secure_argmax(ctx, logits);
    stats.attribute("argmax", peer.take_delta());

    // retrieval
    SharedTensor params;
    std::vector<std::size_t> dims;
    if (mode == ExecMode::Revealed) {
        const std::size_t idx = open_index(ctx, onehot);
        if (selections) selections->push_back(idx);
        params.party = ctx.party;
        params.scale = arts.pool.frac_bits;
        params.shape = {arts.pool.blobs[idx].size()};
        params.data = arts.pool.blobs[idx];
        dims = arts.pool.experts[idx].layer_dims();
    } else {
        params = oblivious_select(ctx, onehot, padded_pool);
        params.scale = arts.pool.frac_bits; // one-hot is scale 0
        dims = padded_dims;
    }
    stats.attribute("retrieval", peer.take_delta());

    // expert on the original embedding, flattened
    SharedTensor e_flat = e_share;
    e_flat.shape = {1, seq * dim};
    SharedTensor y = secure_expert_forward(ctx, e_flat, params, dims);
    stats.attribute("expert", peer.take_delta());
    return y;
}

} // namespace

PartyRunResult run_party(const PartyArtifacts& arts, ExecMode mode,
                         Transport& peer, Transport& client,
                         TripleSource& triples) {
    PartyRunResult res;
    SecureContext ctx;
    ctx.party = arts.party;
    ctx.ring = Ring{};
    ctx.frac_bits = arts.pool.frac_bits;
    ctx.net = &peer;
    ctx.triples = &triples;

    // peer handshake: abort on any config skew
    const auto mine = handshake_frame(mode, arts);
    const auto theirs = peer.exchange(MsgTag::Hello, mine);
    if (theirs != mine)
        throw ProtocolError("handshake mismatch (version/mode/pool/router)");
    res.stats.attribute("io", peer.take_delta());

    const ClientHello hello = parse_hello(client.recv_expect(MsgTag::Hello).payload);
    if (hello.version != kProtocolVersion)
        throw ProtocolError("client protocol version mismatch");
    if (hello.mode != static_cast<u8>(mode))
        throw ProtocolError("client requested a different mode");
    if (hello.seq_len != arts.pool.seq_len || hello.embed_dim != arts.pool.embed_dim ||
        hello.frac_bits != static_cast<u8>(arts.pool.frac_bits))
        throw ProtocolError("client data shape does not match the pool");
    res.stats.attribute("io", client.take_delta());

    SharedTensor padded_pool;
    std::vector<std::size_t> padded_dims;
    if (mode == ExecMode::Oblivious) {
        padded_pool = build_padded_pool_matrix(arts);
        padded_dims = arts.pool.padded_layer_dims();
    }

    for (u64 s = 0; s < hello.samples; s++) {
        const Message m = client.recv_expect(MsgTag::Tensor);
        SharedTensor e_share = parse_tensor(m.payload, ctx.party);
        if (e_share.shape != std::vector<std::size_t>{arts.pool.seq_len, arts.pool.embed_dim})
            throw ProtocolError("embedding share has wrong shape");
        res.stats.attribute("io", client.take_delta());

        SharedTensor y = run_inference(ctx, arts, e_share, mode, padded_pool,
                                       padded_dims, res.stats, peer,
                                       mode == ExecMode::Revealed ? &res.selections
                                                                  : nullptr);

        client.send(MsgTag::Result, serialize_tensor(y));
        res.stats.attribute("io", client.take_delta());
    }

    res.arith_consumed = triples.arith_consumed();
    res.bool_consumed = triples.bool_consumed();
    res.peer_transcript = peer.transcript_digest();
    res.client_transcript = client.transcript_digest();
    return res;
}

ClientRunResult run_client(std::span<const std::vector<double>> samples,
                           std::size_t seq_len, std::size_t embed_dim,
                           int frac_bits, ExecMode mode, u64 share_seed,
                           Transport& p0, Transport& p1) {
    ClientHello hello;
    hello.mode = static_cast<u8>(mode);
    hello.samples = samples.size();
    hello.seq_len = seq_len;
    hello.embed_dim = embed_dim;
    hello.frac_bits = static_cast<u8>(frac_bits);
    const auto hf = hello_frame(hello);
    p0.send(MsgTag::Hello, hf);
    p1.send(MsgTag::Hello, hf);

    std::mt19937_64 rng(share_seed);
    ClientRunResult out;
    for (const auto& sample : samples) {
        auto [s0, s1] = client_prepare(sample, seq_len, embed_dim, frac_bits, rng);
        p0.send(MsgTag::Tensor, serialize_tensor(s0));
        p1.send(MsgTag::Tensor, serialize_tensor(s1));
        const SharedTensor y0 = parse_tensor(p0.recv_expect(MsgTag::Result).payload, 0);
        const SharedTensor y1 = parse_tensor(p1.recv_expect(MsgTag::Result).payload, 1);
        out.results.push_back(client_finish(y0, y1, frac_bits));
    }
    out.p0_transcript = p0.transcript_digest();
    out.p1_transcript = p1.transcript_digest();
    out.stats0 = p0.stats();
    out.stats1 = p1.stats();
    return out;
}

// ---- simulation ----

SimulateReport simulate(const ModelPool& pool, const RouterPolicy& router,
                        std::span<const std::vector<double>> samples,
                        ExecMode mode, u64 seed) {
    std::mt19937_64 share_rng(derive_seed(seed, 1));
    auto [arts0, arts1] = secret_share_pool(pool, router, share_rng);

    auto [c01, c10] = InProcChannel::make_pair();
    auto [cc0, c0c] = InProcChannel::make_pair(); // client <-> party0
    auto [cc1, c1c] = InProcChannel::make_pair(); // client <-> party1

    Transport t01(std::move(c01), true);   // party0 -> party1
    Transport t10(std::move(c10), false);  // party1 -> party0
    Transport tp0c(std::move(c0c), true);  // party0 <-> client
    Transport tp1c(std::move(c1c), true);  // party1 <-> client
    Transport tcp0(std::move(cc0), false); // client <-> party0
    Transport tcp1(std::move(cc1), false); // client <-> party1

    SeededTripleSource triples0(derive_seed(seed, 2), 0);
    SeededTripleSource triples1(derive_seed(seed, 2), 1);

    PartyRunResult r0, r1;
    std::exception_ptr e0, e1;
    std::thread th0([&] {
        try {
            r0 = run_party(arts0, mode, t01, tp0c, triples0);
        } catch (...) {
            e0 = std::current_exception();
            t01.close();
            tp0c.close();
        }
    });
    std::thread th1([&] {
        try {
            r1 = run_party(arts1, mode, t10, tp1c, triples1);
        } catch (...) {
            e1 = std::current_exception();
            t10.close();
            tp1c.close();
        }
    });

    const auto start = std::chrono::steady_clock::now();
    ClientRunResult cr;
    std::exception_ptr ec;
    try {
        cr = run_client(samples, pool.seq_len, pool.embed_dim, pool.frac_bits, mode,
                        derive_seed(seed, 3), tcp0, tcp1);
    } catch (...) {
        ec = std::current_exception();
        tcp0.close();
        tcp1.close();
    }
    th0.join();
    th1.join();
    if (e0) std::rethrow_exception(e0);
    if (e1) std::rethrow_exception(e1);
    if (ec) std::rethrow_exception(ec);

    SimulateReport rep;
    rep.mode = mode;
    rep.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() -
                                                start)
                      .count();
    for (const auto& r : cr.results) {
        rep.labels.push_back(r.label);
        rep.logits.push_back(r.logits);
    }
    rep.selections = r0.selections;
    rep.party0 = r0.stats;
    rep.party1 = r1.stats;
    rep.arith0 = r0.arith_consumed;
    rep.bool0 = r0.bool_consumed;
    rep.arith1 = r1.arith_consumed;
    rep.bool1 = r1.bool_consumed;
    rep.transcript01 = hex(r0.peer_transcript);
    rep.transcript10 = hex(r1.peer_transcript);
    rep.transcript_c0 = hex(r0.client_transcript);
    rep.transcript_c1 = hex(r1.client_transcript);
    return rep;
}

// ---- budget ----

namespace {
TripleBudget mlp_budget(std::span<const std::size_t> dims, unsigned bits) {
    TripleBudget b;
    for (std::size_t l = 0; l + 1 < dims.size(); l++) {
        b.arith += dims[l] * dims[l + 1]; // matmul
        if (l + 2 < dims.size()) {
            b.arith += 2 * dims[l + 1];                  // B2A + relu gate multiply
            b.boolean += dims[l + 1] * (2 * bits - 1);   // a2b AND gates
        }
    }
    return b;
}
} // namespace

TripleBudget estimate_inference_budget(const ModelPool& pool,
                                       const RouterPolicy& router, ExecMode mode,
                                       unsigned ring_bits) {
    TripleBudget total;
    const auto rdims = router.layer_dims();
    const TripleBudget rb = mlp_budget(rdims, ring_bits);
    total.arith += rb.arith;
    total.boolean += rb.boolean;

    // argmax: per step one scalar drelu (a2b + B2A), one max update multiply,
    // k one-hot multiplies
    const std::size_t k = pool.k();
    total.boolean += (k - 1) * (2 * ring_bits - 1);
    total.arith += (k - 1) * (1 + 1 + k);

    if (mode == ExecMode::Oblivious) {
        const auto padded = pool.padded_layer_dims();
        total.arith += k * mlp_param_count(padded);
        const TripleBudget eb = mlp_budget(padded, ring_bits);
        total.arith += eb.arith;
        total.boolean += eb.boolean;
    } else {
        TripleBudget worst;
        for (const auto& e : pool.experts) {
            const auto dims = e.layer_dims();
            const TripleBudget eb = mlp_budget(dims, ring_bits);
            worst.arith = std::max(worst.arith, eb.arith);
            worst.boolean = std::max(worst.boolean, eb.boolean);
        }
        total.arith += worst.arith;
        total.boolean += worst.boolean;
    }
    return total;
}

} // namespace mpcroute
