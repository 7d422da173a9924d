#include "mpcroute/sharing.hpp"

#include <fstream>

#include "mpcroute/errors.hpp"
#include "mpcroute/kernels.hpp"

namespace mpcroute {

SharedTensor SharedTensor::zeros(int party, std::vector<std::size_t> shape,
                                 int scale) {
    SharedTensor t;
    t.party = party;
    t.shape = std::move(shape);
    t.scale = scale;
    t.data.assign(t.numel(), 0);
    return t;
}

// ---- dealer ----

namespace {

inline std::pair<BeaverTripleShare, BeaverTripleShare>
gen_arith_triple(std::mt19937_64& rng, Ring ring) {
    const u64 a0 = rng() & ring.mask;
    const u64 a1 = rng() & ring.mask;
    const u64 b0 = rng() & ring.mask;
    const u64 b1 = rng() & ring.mask;
    const u64 c0 = rng() & ring.mask;
    const u64 c = ring.mul(ring.add(a0, a1), ring.add(b0, b1));
    const u64 c1 = ring.sub(c, c0);
    return {{a0, b0, c0}, {a1, b1, c1}};
}

inline std::pair<BoolTripleShare, BoolTripleShare>
gen_bool_triple(std::mt19937_64& rng) {
    const u64 r = rng();
    const u8 a0 = r & 1, a1 = (r >> 1) & 1;
    const u8 b0 = (r >> 2) & 1, b1 = (r >> 3) & 1;
    const u8 c0 = (r >> 4) & 1;
    const u8 c1 = static_cast<u8>(((a0 ^ a1) & (b0 ^ b1)) ^ c0);
    return {{a0, b0, c0}, {a1, b1, c1}};
}

} // namespace

DealerOutput dealer_generate(std::size_t n_arith, std::size_t n_bool,
                             std::mt19937_64& rng, Ring ring) {
    DealerOutput out;
    out.arith[0].reserve(n_arith);
    out.arith[1].reserve(n_arith);
    for (std::size_t i = 0; i < n_arith; i++) {
        auto [t0, t1] = gen_arith_triple(rng, ring);
        out.arith[0].push_back(t0);
        out.arith[1].push_back(t1);
    }
    out.boolean[0].reserve(n_bool);
    out.boolean[1].reserve(n_bool);
    for (std::size_t i = 0; i < n_bool; i++) {
        auto [t0, t1] = gen_bool_triple(rng);
        out.boolean[0].push_back(t0);
        out.boolean[1].push_back(t1);
    }
    return out;
}

// ---- triple files ----

namespace {
constexpr char kTripleMagic[6] = {'S', 'R', 'T', 'R', 'I', 'P'};
constexpr u8 kTripleVersion = 1;
} // namespace

void write_triple_file(const std::filesystem::path& path,
                       std::span<const BeaverTripleShare> arith,
                       std::span<const BoolTripleShare> boolean) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::vector<u8> buf;
    buf.insert(buf.end(), kTripleMagic, kTripleMagic + 6);
    buf.push_back(kTripleVersion);
    put_u64(buf, arith.size());
    put_u64(buf, boolean.size());
    for (const auto& t : arith) {
        put_u64(buf, t.a);
        put_u64(buf, t.b);
        put_u64(buf, t.c);
    }
    for (const auto& t : boolean) {
        buf.push_back(t.a);
        buf.push_back(t.b);
        buf.push_back(t.c);
    }
    f.write(reinterpret_cast<const char*>(buf.data()),
            static_cast<std::streamsize>(buf.size()));
}

std::pair<std::vector<BeaverTripleShare>, std::vector<BoolTripleShare>>
read_triple_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    std::vector<u8> buf((std::istreambuf_iterator<char>(f)),
                        std::istreambuf_iterator<char>());
    if (buf.size() < 23 || std::memcmp(buf.data(), kTripleMagic, 6) != 0)
        throw ProtocolError("corrupt triple file: bad magic");
    if (buf[6] != kTripleVersion)
        throw ProtocolError("triple file version mismatch");
    const u64 n_arith = get_u64(buf.data() + 7);
    const u64 n_bool = get_u64(buf.data() + 15);
    const std::size_t expect = 23 + n_arith * 24 + n_bool * 3;
    if (buf.size() != expect) throw ProtocolError("corrupt triple file: truncated");
    std::vector<BeaverTripleShare> arith(n_arith);
    std::size_t off = 23;
    for (u64 i = 0; i < n_arith; i++) {
        arith[i].a = get_u64(buf.data() + off);
        arith[i].b = get_u64(buf.data() + off + 8);
        arith[i].c = get_u64(buf.data() + off + 16);
        off += 24;
    }
    std::vector<BoolTripleShare> boolean(n_bool);
    for (u64 i = 0; i < n_bool; i++) {
        boolean[i] = {buf[off], buf[off + 1], buf[off + 2]};
        off += 3;
    }
    return {std::move(arith), std::move(boolean)};
}

// ---- triple sources ----

void SeededTripleSource::next_arith(std::size_t n, BeaverTripleShare* out) {
    for (std::size_t i = 0; i < n; i++) {
        auto [t0, t1] = gen_arith_triple(rng_, ring_);
        out[i] = party_ == 0 ? t0 : t1;
    }
    arith_used_ += n;
}

void SeededTripleSource::next_bool(std::size_t n, BoolTripleShare* out) {
    for (std::size_t i = 0; i < n; i++) {
        auto [t0, t1] = gen_bool_triple(rng_);
        out[i] = party_ == 0 ? t0 : t1;
    }
    bool_used_ += n;
}

void VectorTripleSource::next_arith(std::size_t n, BeaverTripleShare* out) {
    if (arith_pos_ + n > arith_.size())
        throw ProtocolError("arithmetic triple pool exhausted");
    std::copy_n(arith_.begin() + static_cast<std::ptrdiff_t>(arith_pos_), n, out);
    arith_pos_ += n;
    arith_used_ += n;
}

void VectorTripleSource::next_bool(std::size_t n, BoolTripleShare* out) {
    if (bool_pos_ + n > bool_.size())
        throw ProtocolError("boolean triple pool exhausted");
    std::copy_n(bool_.begin() + static_cast<std::ptrdiff_t>(bool_pos_), n, out);
    bool_pos_ += n;
    bool_used_ += n;
}

// ---- share / reconstruct ----

std::pair<Share, Share> share(u64 x, int scale, std::mt19937_64& rng, Ring ring) {
    const u64 s0 = rng() & ring.mask;
    const u64 s1 = ring.sub(x & ring.mask, s0);
    return {Share{0, s0, scale}, Share{1, s1, scale}};
}

u64 reconstruct(const Share& s0, const Share& s1, Ring ring) {
    if (s0.party == s1.party) throw ProtocolError("reconstruct: same-party shares");
    if (s0.scale != s1.scale) throw ProtocolError("reconstruct: scale mismatch");
    return ring.add(s0.value, s1.value);
}

std::pair<SharedTensor, SharedTensor> share_tensor(std::span<const u64> values,
                                                   std::vector<std::size_t> shape,
                                                   int scale, std::mt19937_64& rng,
                                                   Ring ring) {
    SharedTensor t0, t1;
    t0.party = 0;
    t1.party = 1;
    t0.shape = shape;
    t1.shape = std::move(shape);
    t0.scale = t1.scale = scale;
    t0.data.resize(values.size());
    t1.data.resize(values.size());
    for (std::size_t i = 0; i < values.size(); i++) {
        const u64 s0 = rng() & ring.mask;
        t0.data[i] = s0;
        t1.data[i] = ring.sub(values[i] & ring.mask, s0);
    }
    if (t0.numel() != values.size())
        throw std::invalid_argument("share_tensor: shape does not match value count");
    return {std::move(t0), std::move(t1)};
}

std::vector<u64> reconstruct_tensor(const SharedTensor& s0, const SharedTensor& s1,
                                    Ring ring) {
    if (s0.party == s1.party) throw ProtocolError("reconstruct: same-party shares");
    if (s0.scale != s1.scale) throw ProtocolError("reconstruct: scale mismatch");
    if (s0.shape != s1.shape) throw ProtocolError("reconstruct: shape mismatch");
    std::vector<u64> out(s0.data.size());
    kernels::ring_add(s0.data.data(), s1.data.data(), out.data(), out.size(),
                      ring.mask);
    return out;
}

// ---- local ops ----

namespace {
void check_pair(const SharedTensor& x, const SharedTensor& y, const char* what) {
    if (x.party != y.party)
        throw ProtocolError(std::string(what) + ": party mismatch");
    if (x.shape != y.shape)
        throw ProtocolError(std::string(what) + ": shape mismatch");
    if (x.scale != y.scale)
        throw ProtocolError(std::string(what) + ": scale mismatch");
}
} // namespace

SharedTensor add_local(const SharedTensor& x, const SharedTensor& y, Ring ring) {
    check_pair(x, y, "add_local");
    SharedTensor out = x;
    kernels::ring_add(x.data.data(), y.data.data(), out.data.data(),
                      out.data.size(), ring.mask);
    return out;
}

SharedTensor sub_local(const SharedTensor& x, const SharedTensor& y, Ring ring) {
    check_pair(x, y, "sub_local");
    SharedTensor out = x;
    kernels::ring_sub(x.data.data(), y.data.data(), out.data.data(),
                      out.data.size(), ring.mask);
    return out;
}

SharedTensor neg_local(const SharedTensor& x, Ring ring) {
    SharedTensor out = x;
    for (auto& v : out.data) v = ring.neg(v);
    return out;
}

SharedTensor add_public(const SharedTensor& x, std::span<const u64> consts,
                        Ring ring) {
    if (consts.size() != x.data.size())
        throw std::invalid_argument("add_public: size mismatch");
    SharedTensor out = x;
    if (x.party == 0)
        kernels::ring_add(x.data.data(), consts.data(), out.data.data(),
                          out.data.size(), ring.mask);
    return out;
}

SharedTensor scale_public(const SharedTensor& x, u64 c, int c_scale, Ring ring) {
    SharedTensor out = x;
    kernels::ring_scale(x.data.data(), c, out.data.data(), out.data.size(),
                        ring.mask);
    out.scale = x.scale + c_scale;
    return out;
}

// ---- beaver multiplication ----

namespace {

// Packs eps||delta, runs the one open round, returns the publicly opened
// eps/delta (sum of both parties' masked differences).
void open_masked(std::span<const u64> eps_share, std::span<const u64> delta_share,
                Transport& net, Ring ring, std::vector<u64>& eps_pub,
                std::vector<u64>& delta_pub) {
    const std::size_t n = eps_share.size();
    std::vector<u8> body;
    body.reserve(16 * n);
    for (u64 v : eps_share) put_u64(body, v);
    for (u64 v : delta_share) put_u64(body, v);
    std::vector<u8> peer = net.exchange(MsgTag::Open, body);
    if (peer.size() != body.size())
        throw ProtocolError("beaver open: peer payload size mismatch");
    eps_pub.resize(n);
    delta_pub.resize(n);
    for (std::size_t i = 0; i < n; i++) {
        eps_pub[i] = ring.add(eps_share[i], get_u64(peer.data() + 8 * i));
        delta_pub[i] = ring.add(delta_share[i], get_u64(peer.data() + 8 * (n + i)));
    }
}

} // namespace

Share beaver_mul_scalar(const Share& x, const Share& y, BeaverTriple& t,
                        Transport& net, int party, Ring ring) {
    if (t.consumed) throw ProtocolError("beaver triple reuse");
    t.consumed = true;
    const u64 eps_share = ring.sub(x.value, t.share.a);
    const u64 delta_share = ring.sub(y.value, t.share.b);
    std::vector<u64> eps_pub, delta_pub;
    open_masked({&eps_share, 1}, {&delta_share, 1}, net, ring, eps_pub, delta_pub);
    u64 z = ring.add(t.share.c, ring.mul(eps_pub[0], t.share.b));
    z = ring.add(z, ring.mul(delta_pub[0], t.share.a));
    if (party == 0) z = ring.add(z, ring.mul(eps_pub[0], delta_pub[0]));
    return Share{party, z, x.scale + y.scale};
}

SharedTensor beaver_mul(const SharedTensor& x, const SharedTensor& y,
                        TripleSource& triples, Transport& net, Ring ring) {
    if (x.party != y.party) throw ProtocolError("beaver_mul: party mismatch");
    if (x.shape != y.shape) throw ProtocolError("beaver_mul: shape mismatch");
    const std::size_t n = x.data.size();
    std::vector<BeaverTripleShare> t(n);
    triples.next_arith(n, t.data());

    std::vector<u64> eps_share(n), delta_share(n), a(n), b(n), c(n);
    for (std::size_t i = 0; i < n; i++) {
        a[i] = t[i].a;
        b[i] = t[i].b;
        c[i] = t[i].c;
    }
    kernels::ring_sub(x.data.data(), a.data(), eps_share.data(), n, ring.mask);
    kernels::ring_sub(y.data.data(), b.data(), delta_share.data(), n, ring.mask);

    std::vector<u64> eps_pub, delta_pub;
    open_masked(eps_share, delta_share, net, ring, eps_pub, delta_pub);

    SharedTensor out;
    out.party = x.party;
    out.shape = x.shape;
    out.scale = x.scale + y.scale;
    out.data.resize(n);
    kernels::beaver_combine(eps_pub.data(), delta_pub.data(), a.data(), b.data(),
                            c.data(), x.party == 0, out.data.data(), n, ring.mask);
    return out;
}

SharedTensor beaver_matmul(const SharedTensor& x, const SharedTensor& y,
                           TripleSource& triples, Transport& net, Ring ring) {
    if (x.party != y.party) throw ProtocolError("beaver_matmul: party mismatch");
    if (x.shape.size() != 2 || y.shape.size() != 2 || x.shape[1] != y.shape[0])
        throw ProtocolError("beaver_matmul: shape mismatch");
    const std::size_t n = x.shape[0], d = x.shape[1], m = y.shape[1];
    const std::size_t slots = n * d * m;
    std::vector<BeaverTripleShare> t(slots);
    triples.next_arith(slots, t.data());

    std::vector<u64> eps_share(slots), delta_share(slots), a(slots), b(slots),
        c(slots);
    for (std::size_t i = 0; i < n; i++) {
        for (std::size_t k = 0; k < d; k++) {
            for (std::size_t j = 0; j < m; j++) {
                const std::size_t s = (i * d + k) * m + j;
                a[s] = t[s].a;
                b[s] = t[s].b;
                c[s] = t[s].c;
                eps_share[s] = ring.sub(x.data[i * d + k], t[s].a);
                delta_share[s] = ring.sub(y.data[k * m + j], t[s].b);
            }
        }
    }

    std::vector<u64> eps_pub, delta_pub;
    open_masked(eps_share, delta_share, net, ring, eps_pub, delta_pub);

    SharedTensor out;
    out.party = x.party;
    out.shape = {n, m};
    out.scale = x.scale + y.scale;
    out.data.resize(n * m);
    kernels::beaver_matmul_combine(eps_pub.data(), delta_pub.data(), a.data(),
                                   b.data(), c.data(), x.party == 0,
                                   out.data.data(), n, d, m, ring.mask);
    return out;
}

SharedTensor truncate_shares(const SharedTensor& x, int f, Ring ring) {
    SharedTensor out = x;
    out.scale = x.scale - f;
    if (x.party == 0) {
        for (auto& v : out.data) v = (v & ring.mask) >> f;
    } else {
        for (auto& v : out.data) v = ring.neg(ring.neg(v) >> f);
    }
    return out;
}

// ---- wire format ----

std::vector<u8> serialize_tensor(const SharedTensor& t) {
    std::vector<u8> out;
    out.reserve(2 + 8 * t.shape.size() + 8 * t.data.size());
    out.push_back(static_cast<u8>(t.shape.size()));
    for (auto d : t.shape) put_u64(out, d);
    out.push_back(static_cast<u8>(t.scale));
    for (u64 v : t.data) put_u64(out, v);
    return out;
}

SharedTensor parse_tensor(std::span<const u8> bytes, int party) {
    if (bytes.empty()) throw ProtocolError("tensor frame: empty");
    const std::size_t ndim = bytes[0];
    std::size_t off = 1;
    if (bytes.size() < off + 8 * ndim + 1)
        throw ProtocolError("tensor frame: truncated header");
    SharedTensor t;
    t.party = party;
    t.shape.resize(ndim);
    std::size_t numel = 1;
    for (std::size_t i = 0; i < ndim; i++) {
        t.shape[i] = get_u64(bytes.data() + off);
        numel *= t.shape[i];
        off += 8;
    }
    t.scale = bytes[off++];
    if (bytes.size() != off + 8 * numel)
        throw ProtocolError("tensor frame: payload size mismatch");
    t.data.resize(numel);
    for (std::size_t i = 0; i < numel; i++) {
        t.data[i] = get_u64(bytes.data() + off);
        off += 8;
    }
    return t;
}

} // namespace mpcroute
