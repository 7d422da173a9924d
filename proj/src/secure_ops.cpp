#include "mpcroute/secure_ops.hpp"

#include <stdexcept>

#include "mpcroute/errors.hpp"

namespace mpcroute {

namespace {

// Secure AND of packed XOR-shared bit vectors laid out as `planes` planes of
// n bits each (W = ceil(n/64) words per plane, tail bits zero). Consumes
// exactly planes*n boolean triples and one open round per call.
std::vector<u64> and_open(SecureContext& ctx, std::span<const u64> x,
                          std::span<const u64> y, std::size_t planes,
                          std::size_t n) {
    const std::size_t W = (n + 63) / 64;
    if (x.size() != planes * W || y.size() != planes * W)
        throw ProtocolError("and_open: word count mismatch");

    std::vector<BoolTripleShare> t(planes * n);
    ctx.triples->next_bool(planes * n, t.data());
    std::vector<u64> wa(planes * W, 0), wb(planes * W, 0), wc(planes * W, 0);
    std::size_t ti = 0;
    for (std::size_t p = 0; p < planes; p++) {
        for (std::size_t i = 0; i < n; i++, ti++) {
            const std::size_t w = p * W + i / 64;
            const unsigned sh = i % 64;
            wa[w] |= static_cast<u64>(t[ti].a & 1) << sh;
            wb[w] |= static_cast<u64>(t[ti].b & 1) << sh;
            wc[w] |= static_cast<u64>(t[ti].c & 1) << sh;
        }
    }

    std::vector<u8> body;
    body.reserve(16 * planes * W);
    for (std::size_t w = 0; w < planes * W; w++) put_u64(body, x[w] ^ wa[w]);
    for (std::size_t w = 0; w < planes * W; w++) put_u64(body, y[w] ^ wb[w]);
    std::vector<u8> peer = ctx.net->exchange(MsgTag::Bits, body);
    if (peer.size() != body.size())
        throw ProtocolError("and_open: peer payload size mismatch");

    std::vector<u64> z(planes * W);
    for (std::size_t w = 0; w < planes * W; w++) {
        const u64 d_pub = (x[w] ^ wa[w]) ^ get_u64(peer.data() + 8 * w);
        const u64 e_pub = (y[w] ^ wb[w]) ^ get_u64(peer.data() + 8 * (planes * W + w));
        u64 zw = wc[w] ^ (d_pub & wb[w]) ^ (e_pub & wa[w]);
        if (ctx.party == 0) zw ^= d_pub & e_pub;
        z[w] = zw;
    }
    return z;
}

inline u64 plane_tail_mask(std::size_t n) {
    const unsigned rem = n % 64;
    return rem == 0 ? ~0ULL : ((~0ULL) >> (64 - rem));
}

} // namespace

BitPlanes a2b_tensor(SecureContext& ctx, const SharedTensor& x) {
    const std::size_t n = x.data.size();
    if (n == 0) throw std::invalid_argument("a2b: empty tensor");
    const unsigned bits = ctx.ring.bits;
    const std::size_t W = (n + 63) / 64;

    // Party p holds its own share's bits as one addend of the binary adder
    // and an all-zero XOR-share of the other addend.
    std::vector<u64> mine(bits * W, 0);
    for (std::size_t e = 0; e < n; e++) {
        const u64 v = x.data[e] & ctx.ring.mask;
        for (unsigned p = 0; p < bits; p++)
            mine[p * W + e / 64] |= ((v >> p) & 1ULL) << (e % 64);
    }
    const std::vector<u64> zero(bits * W, 0);
    const std::vector<u64>& A = ctx.party == 0 ? mine : zero;
    const std::vector<u64>& B = ctx.party == 0 ? zero : mine;

    // Generate bits for every level in one batched round, then ripple the
    // carry: c_{p+1} = g_p XOR (prop_p AND c_p), s_p = prop_p XOR c_p.
    // prop_p = A_p XOR B_p is local (each party's own share bits).
    const std::vector<u64> g = and_open(ctx, A, B, bits, n);

    BitPlanes out;
    out.party = ctx.party;
    out.n = n;
    out.bits = bits;
    out.words.assign(bits * W, 0);

    std::vector<u64> carry(W, 0);
    for (unsigned p = 0; p < bits; p++) {
        for (std::size_t w = 0; w < W; w++)
            out.words[p * W + w] = mine[p * W + w] ^ carry[w];
        if (p + 1 < bits) {
            std::span<const u64> prop{mine.data() + p * W, W};
            const std::vector<u64> t = and_open(ctx, prop, carry, 1, n);
            for (std::size_t w = 0; w < W; w++) carry[w] = g[p * W + w] ^ t[w];
        }
    }
    return out;
}

BitSharedVector a2b(SecureContext& ctx, const SharedTensor& x_scalar) {
    if (x_scalar.data.size() != 1)
        throw std::invalid_argument("a2b: expected scalar tensor");
    const BitPlanes planes = a2b_tensor(ctx, x_scalar);
    BitSharedVector out;
    out.party = ctx.party;
    out.bits.resize(planes.bits);
    for (unsigned p = 0; p < planes.bits; p++)
        out.bits[p] = static_cast<u8>(planes.words[p] & 1ULL);
    return out;
}

SharedTensor drelu(SecureContext& ctx, const SharedTensor& x) {
    const std::size_t n = x.data.size();
    const BitPlanes planes = a2b_tensor(ctx, x);
    const std::size_t W = planes.words_per_plane();

    // b = NOT msb; party 0 flips its XOR share.
    std::vector<u64> msb(planes.words.end() - static_cast<std::ptrdiff_t>(W),
                         planes.words.end());
    if (ctx.party == 0) {
        const u64 tail = plane_tail_mask(n);
        for (std::size_t w = 0; w < W; w++)
            msb[w] ^= (w + 1 == W) ? tail : ~0ULL;
    }

    // B2A: [b] = [b0] + [b1] - 2*[b0]*[b1], where [b_i] is party i's XOR
    // bit entered as a trivial arithmetic sharing. One Beaver round.
    SharedTensor t_b0 = SharedTensor::zeros(ctx.party, x.shape, 0);
    SharedTensor t_b1 = SharedTensor::zeros(ctx.party, x.shape, 0);
    SharedTensor& own = ctx.party == 0 ? t_b0 : t_b1;
    for (std::size_t e = 0; e < n; e++)
        own.data[e] = (msb[e / 64] >> (e % 64)) & 1ULL;
    const SharedTensor prod = beaver_mul(t_b0, t_b1, *ctx.triples, *ctx.net, ctx.ring);

    SharedTensor out = SharedTensor::zeros(ctx.party, x.shape, 0);
    for (std::size_t e = 0; e < n; e++) {
        const u64 sum = ctx.ring.add(t_b0.data[e], t_b1.data[e]);
        out.data[e] = ctx.ring.sub(sum, ctx.ring.mul(2, prod.data[e]));
    }
    return out;
}

SharedTensor relu(SecureContext& ctx, const SharedTensor& x) {
    const SharedTensor gate = drelu(ctx, x);
    return beaver_mul(x, gate, *ctx.triples, *ctx.net, ctx.ring);
}

SharedTensor secure_linear(SecureContext& ctx, const SharedTensor& x,
                           const SharedTensor& W, const SharedTensor& b) {
    if (x.scale != W.scale || b.scale != x.scale)
        throw ProtocolError("secure_linear: scale mismatch");
    if (W.shape.size() != 2 || b.numel() != W.shape[1])
        throw ProtocolError("secure_linear: bias shape mismatch");
    SharedTensor prod = beaver_matmul(x, W, *ctx.triples, *ctx.net, ctx.ring);
    SharedTensor z = truncate_shares(prod, W.scale, ctx.ring);
    const std::size_t rows = z.shape[0], cols = z.shape[1];
    for (std::size_t i = 0; i < rows; i++)
        for (std::size_t j = 0; j < cols; j++)
            z.data[i * cols + j] = ctx.ring.add(z.data[i * cols + j], b.data[j]);
    return z;
}

SharedTensor secure_argmax(SecureContext& ctx, const SharedTensor& v) {
    const std::size_t k = v.numel();
    if (k == 0) throw std::invalid_argument("secure_argmax: empty input");

    SharedTensor onehot = SharedTensor::zeros(ctx.party, {k}, 0);
    if (ctx.party == 0) onehot.data[0] = 1;
    if (k == 1) return onehot;

    SharedTensor maxv = SharedTensor::zeros(ctx.party, {1}, v.scale);
    maxv.data[0] = v.data[0];

    for (std::size_t i = 1; i < k; i++) {
        // strict replacement: v_i > max  <=>  v_i - max - 1 >= 0
        SharedTensor diff = SharedTensor::zeros(ctx.party, {1}, v.scale);
        diff.data[0] = ctx.ring.sub(v.data[i], maxv.data[0]);
        if (ctx.party == 0) diff.data[0] = ctx.ring.sub(diff.data[0], 1);
        SharedTensor c = drelu(ctx, diff);

        // max <- max + c*(v_i - max)
        SharedTensor vm = SharedTensor::zeros(ctx.party, {1}, v.scale);
        vm.data[0] = ctx.ring.sub(v.data[i], maxv.data[0]);
        SharedTensor step = beaver_mul(c, vm, *ctx.triples, *ctx.net, ctx.ring);
        step.scale = maxv.scale; // c has scale 0
        maxv.data[0] = ctx.ring.add(maxv.data[0], step.data[0]);

        // onehot <- (1-c)*onehot + c*e_i
        SharedTensor cvec = SharedTensor::zeros(ctx.party, {k}, 0);
        for (std::size_t j = 0; j < k; j++) cvec.data[j] = c.data[0];
        SharedTensor masked = beaver_mul(cvec, onehot, *ctx.triples, *ctx.net, ctx.ring);
        for (std::size_t j = 0; j < k; j++)
            onehot.data[j] = ctx.ring.sub(onehot.data[j], masked.data[j]);
        onehot.data[i] = ctx.ring.add(onehot.data[i], c.data[0]);
    }
    return onehot;
}

SharedTensor oblivious_select(SecureContext& ctx, const SharedTensor& sel,
                              const SharedTensor& pool) {
    if (pool.shape.size() != 2 || sel.numel() != pool.shape[0])
        throw ProtocolError("oblivious_select: dimension mismatch");
    SharedTensor row = sel;
    row.shape = {1, sel.numel()};
    SharedTensor out = beaver_matmul(row, pool, *ctx.triples, *ctx.net, ctx.ring);
    out.shape = {pool.shape[1]};
    return out;
}

std::size_t mlp_param_count(std::span<const std::size_t> layer_dims) {
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); l++)
        total += layer_dims[l] * layer_dims[l + 1] + layer_dims[l + 1];
    return total;
}

SharedTensor secure_expert_forward(SecureContext& ctx, const SharedTensor& x,
                                   const SharedTensor& params,
                                   std::span<const std::size_t> layer_dims) {
    if (layer_dims.size() < 2)
        throw std::invalid_argument("expert forward: need at least one layer");
    if (params.numel() != mlp_param_count(layer_dims))
        throw ProtocolError("expert forward: parameter layout mismatch");
    if (x.numel() != layer_dims[0])
        throw ProtocolError("expert forward: input width mismatch");

    SharedTensor act = x;
    act.shape = {1, layer_dims[0]};
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); l++) {
        const std::size_t in = layer_dims[l], out_w = layer_dims[l + 1];
        SharedTensor W;
        W.party = params.party;
        W.scale = params.scale;
        W.shape = {in, out_w};
        W.data.assign(params.data.begin() + static_cast<std::ptrdiff_t>(off),
                      params.data.begin() + static_cast<std::ptrdiff_t>(off + in * out_w));
        off += in * out_w;
        SharedTensor b;
        b.party = params.party;
        b.scale = params.scale;
        b.shape = {out_w};
        b.data.assign(params.data.begin() + static_cast<std::ptrdiff_t>(off),
                      params.data.begin() + static_cast<std::ptrdiff_t>(off + out_w));
        off += out_w;

        act = secure_linear(ctx, act, W, b);
        if (l + 2 < layer_dims.size()) act = relu(ctx, act);
    }
    act.shape = {layer_dims.back()};
    return act;
}

std::size_t open_index(SecureContext& ctx, const SharedTensor& onehot) {
    std::vector<u8> body;
    body.reserve(8 * onehot.data.size());
    for (u64 v : onehot.data) put_u64(body, v);
    std::vector<u8> peer = ctx.net->exchange(MsgTag::IndexOpen, body);
    if (peer.size() != body.size())
        throw ProtocolError("open_index: peer payload size mismatch");
    std::size_t index = onehot.numel();
    for (std::size_t i = 0; i < onehot.numel(); i++) {
        const u64 v = ctx.ring.add(onehot.data[i], get_u64(peer.data() + 8 * i));
        if (v == 1) {
            if (index != onehot.numel())
                throw ProtocolError("open_index: selection is not one-hot");
            index = i;
        } else if (v != 0) {
            throw ProtocolError("open_index: selection is not 0/1");
        }
    }
    if (index == onehot.numel())
        throw ProtocolError("open_index: empty selection");
    return index;
}

} // namespace mpcroute
