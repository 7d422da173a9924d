#include "mpcroute/modelpool.hpp"

#include <fstream>
#include <set>

#include <json.hpp>

#include "mpcroute/errors.hpp"
#include "mpcroute/secure_ops.hpp"

namespace mpcroute {

using nlohmann::json;

// ---- specs ----

std::vector<std::size_t> ExpertSpec::layer_dims() const {
    std::vector<std::size_t> dims;
    dims.push_back(input_dim);
    dims.insert(dims.end(), hidden.begin(), hidden.end());
    dims.push_back(classes);
    return dims;
}

std::size_t ExpertSpec::param_count() const {
    const auto dims = layer_dims();
    return mlp_param_count(dims);
}

void ExpertSpec::validate() const {
    if (name.empty()) throw std::invalid_argument("expert name empty");
    if (input_dim < 1 || classes < 1)
        throw std::invalid_argument("expert " + name + ": widths must be >= 1");
    for (auto h : hidden)
        if (h < 1) throw std::invalid_argument("expert " + name + ": widths must be >= 1");
    if (!(cost > 0)) throw std::invalid_argument("expert " + name + ": cost must be > 0");
}

std::vector<double> ModelPool::costs() const {
    std::vector<double> c;
    c.reserve(experts.size());
    for (const auto& e : experts) c.push_back(e.cost);
    return c;
}

std::size_t ModelPool::baseline_index() const {
    std::size_t best = 0;
    for (std::size_t i = 0; i < experts.size(); i++)
        if (experts[i].param_count() >= experts[best].param_count()) best = i;
    return best;
}

std::vector<std::size_t> ModelPool::padded_layer_dims() const {
    if (experts.empty()) throw std::invalid_argument("empty pool");
    const std::size_t depth = experts.front().layer_dims().size();
    std::vector<std::size_t> padded(depth, 0);
    for (const auto& e : experts) {
        const auto dims = e.layer_dims();
        if (dims.size() != depth)
            throw std::invalid_argument(
                "oblivious padding requires a uniform layer count across experts");
        for (std::size_t i = 0; i < depth; i++)
            padded[i] = std::max(padded[i], dims[i]);
    }
    return padded;
}

void ModelPool::validate() const {
    if (experts.size() < 2 || experts.size() > 8)
        throw std::invalid_argument("pool must hold between 2 and 8 experts");
    std::set<std::string> names;
    for (const auto& e : experts) {
        e.validate();
        if (e.input_dim != seq_len * embed_dim)
            throw std::invalid_argument("expert " + e.name +
                                        ": input width must equal seq_len*embed_dim");
        if (e.classes != classes)
            throw std::invalid_argument("expert " + e.name + ": class count mismatch");
        if (!names.insert(e.name).second)
            throw std::invalid_argument("duplicate expert name " + e.name);
    }
    if (blobs.size() != experts.size())
        throw std::invalid_argument("blob count does not match expert count");
    for (std::size_t i = 0; i < experts.size(); i++)
        if (blobs[i].size() != experts[i].param_count())
            throw std::invalid_argument("expert " + experts[i].name +
                                        ": blob size does not match architecture");
}

std::size_t RouterPolicy::param_count() const {
    const auto dims = layer_dims();
    return mlp_param_count(dims);
}

void RouterPolicy::validate() const {
    if (summary_dim < 1 || hidden < 1 || k < 2)
        throw std::invalid_argument("router dims invalid");
    if (blob.size() != param_count())
        throw std::invalid_argument("router blob size does not match dims");
}

// ---- quantization ----

QuantResult quantize(std::span<const double> weights, const FixedPointCodec& codec) {
    QuantResult out;
    out.data.reserve(weights.size());
    for (double w : weights) {
        const u64 q = codec.encode(w);
        out.data.push_back(q);
        out.max_error = std::max(out.max_error, std::abs(codec.decode(q) - w));
    }
    return out;
}

std::vector<double> dequantize(std::span<const u64> blob, const FixedPointCodec& codec) {
    std::vector<double> out;
    out.reserve(blob.size());
    for (u64 v : blob) out.push_back(codec.decode(v));
    return out;
}

ModelPool build_pool(std::size_t seq_len, std::size_t embed_dim,
                     std::size_t classes, int frac_bits,
                     std::vector<ExpertSpec> experts,
                     const std::vector<std::vector<double>>& real_params) {
    ModelPool pool;
    pool.seq_len = seq_len;
    pool.embed_dim = embed_dim;
    pool.classes = classes;
    pool.frac_bits = frac_bits;
    pool.experts = std::move(experts);
    const FixedPointCodec codec{Ring{}, frac_bits};
    for (const auto& p : real_params) pool.blobs.push_back(quantize(p, codec).data);
    pool.validate();
    return pool;
}

RouterPolicy build_router(std::size_t summary_dim, std::size_t hidden,
                          std::size_t k, int frac_bits,
                          std::span<const double> real_flat) {
    RouterPolicy r;
    r.summary_dim = summary_dim;
    r.hidden = hidden;
    r.k = k;
    r.frac_bits = frac_bits;
    r.blob = quantize(real_flat, FixedPointCodec{Ring{}, frac_bits}).data;
    r.validate();
    return r;
}

// ---- blob container ----

namespace {

constexpr char kPoolMagic[6] = {'S', 'R', 'P', 'O', 'O', 'L'};
constexpr char kShareMagic[6] = {'S', 'R', 'S', 'H', 'R', 'E'};
constexpr u8 kBlobVersion = 1;

std::vector<u8> blob_container(std::span<const std::vector<u64>> tensors,
                               int frac_bits, int party /* -1 = plaintext */) {
    std::vector<u8> out;
    out.insert(out.end(), party < 0 ? kPoolMagic : kShareMagic,
               (party < 0 ? kPoolMagic : kShareMagic) + 6);
    out.push_back(kBlobVersion);
    if (party >= 0) out.push_back(static_cast<u8>(party));
    put_u64(out, tensors.size());
    for (const auto& t : tensors) {
        SharedTensor wire;
        wire.party = std::max(party, 0);
        wire.shape = {t.size()};
        wire.scale = frac_bits;
        wire.data = t;
        const auto bytes = serialize_tensor(wire);
        out.insert(out.end(), bytes.begin(), bytes.end());
    }
    return out;
}

std::vector<std::vector<u64>> parse_blob_container(std::span<const u8> bytes,
                                                   bool share_file,
                                                   int* party_out) {
    const char* magic = share_file ? kShareMagic : kPoolMagic;
    std::size_t off = 7 + (share_file ? 1 : 0) + 8;
    if (bytes.size() < off || std::memcmp(bytes.data(), magic, 6) != 0)
        throw std::runtime_error("corrupt blob file: bad magic");
    if (bytes[6] != kBlobVersion)
        throw std::runtime_error("blob file version mismatch");
    std::size_t pos = 7;
    if (share_file) {
        if (party_out) *party_out = bytes[pos];
        pos++;
    }
    const u64 count = get_u64(bytes.data() + pos);
    pos += 8;
    std::vector<std::vector<u64>> tensors;
    tensors.reserve(count);
    for (u64 i = 0; i < count; i++) {
        // wire tensor: [ndim][dims...][scale][data]
        if (pos >= bytes.size()) throw std::runtime_error("corrupt blob file: truncated");
        const std::size_t ndim = bytes[pos];
        std::size_t header = 1 + 8 * ndim + 1;
        if (pos + header > bytes.size())
            throw std::runtime_error("corrupt blob file: truncated");
        std::size_t numel = 1;
        for (std::size_t d = 0; d < ndim; d++)
            numel *= get_u64(bytes.data() + pos + 1 + 8 * d);
        if (pos + header + 8 * numel > bytes.size())
            throw std::runtime_error("corrupt blob file: truncated");
        const SharedTensor t = parse_tensor(
            bytes.subspan(pos, header + 8 * numel), 0);
        tensors.push_back(t.data);
        pos += header + 8 * numel;
    }
    if (pos != bytes.size()) throw std::runtime_error("corrupt blob file: trailing bytes");
    return tensors;
}

void write_file(const std::filesystem::path& path, std::span<const u8> bytes) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    f.write(reinterpret_cast<const char*>(bytes.data()),
            static_cast<std::streamsize>(bytes.size()));
}

std::vector<u8> read_file(const std::filesystem::path& path) {
    std::ifstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    return {std::istreambuf_iterator<char>(f), std::istreambuf_iterator<char>()};
}

json pool_manifest(const ModelPool& pool, const std::string& blob_name) {
    json j;
    j["format"] = "mpcroute-pool";
    j["version"] = 1;
    j["frac_bits"] = pool.frac_bits;
    j["seq_len"] = pool.seq_len;
    j["embed_dim"] = pool.embed_dim;
    j["classes"] = pool.classes;
    j["blob"] = blob_name;
    j["experts"] = json::array();
    for (const auto& e : pool.experts) {
        json je;
        je["name"] = e.name;
        je["hidden"] = e.hidden;
        je["cost"] = e.cost;
        j["experts"].push_back(je);
    }
    return j;
}

ModelPool pool_from_manifest(const json& j) {
    ModelPool pool;
    if (j.value("format", "") != "mpcroute-pool")
        throw std::runtime_error("not a pool manifest");
    if (j.value("version", 0) != 1) throw std::runtime_error("pool manifest version mismatch");
    pool.frac_bits = j.at("frac_bits").get<int>();
    pool.seq_len = j.at("seq_len").get<std::size_t>();
    pool.embed_dim = j.at("embed_dim").get<std::size_t>();
    pool.classes = j.at("classes").get<std::size_t>();
    for (const auto& je : j.at("experts")) {
        ExpertSpec e;
        e.name = je.at("name").get<std::string>();
        e.hidden = je.at("hidden").get<std::vector<std::size_t>>();
        e.cost = je.at("cost").get<double>();
        e.input_dim = pool.seq_len * pool.embed_dim;
        e.classes = pool.classes;
        pool.experts.push_back(std::move(e));
    }
    return pool;
}

json router_manifest(const RouterPolicy& r, const std::string& blob_name) {
    json j;
    j["format"] = "mpcroute-router";
    j["version"] = 1;
    j["frac_bits"] = r.frac_bits;
    j["summary_dim"] = r.summary_dim;
    j["hidden"] = r.hidden;
    j["k"] = r.k;
    j["blob"] = blob_name;
    return j;
}

RouterPolicy router_from_manifest(const json& j) {
    if (j.value("format", "") != "mpcroute-router")
        throw std::runtime_error("not a router manifest");
    if (j.value("version", 0) != 1)
        throw std::runtime_error("router manifest version mismatch");
    RouterPolicy r;
    r.frac_bits = j.at("frac_bits").get<int>();
    r.summary_dim = j.at("summary_dim").get<std::size_t>();
    r.hidden = j.at("hidden").get<std::size_t>();
    r.k = j.at("k").get<std::size_t>();
    return r;
}

std::string sibling_name(const std::filesystem::path& json_path) {
    return json_path.stem().string() + ".bin";
}

} // namespace

std::vector<u8> pool_blob_bytes(const ModelPool& pool) {
    return blob_container(pool.blobs, pool.frac_bits, -1);
}

std::vector<u8> router_blob_bytes(const RouterPolicy& router) {
    const std::vector<std::vector<u64>> one{router.blob};
    return blob_container(one, router.frac_bits, -1);
}

void save_pool(const ModelPool& pool, const std::filesystem::path& json_path) {
    pool.validate();
    const std::string blob_name = sibling_name(json_path);
    json j = pool_manifest(pool, blob_name);
    std::ofstream f(json_path);
    if (!f) throw std::runtime_error("cannot open " + json_path.string());
    f << j.dump(2) << "\n";
    write_file(json_path.parent_path() / blob_name, pool_blob_bytes(pool));
}

ModelPool load_pool(const std::filesystem::path& json_path) {
    std::ifstream f(json_path);
    if (!f) throw std::runtime_error("cannot open " + json_path.string());
    json j = json::parse(f);
    ModelPool pool = pool_from_manifest(j);
    const auto bytes = read_file(json_path.parent_path() / j.at("blob").get<std::string>());
    pool.blobs = parse_blob_container(bytes, false, nullptr);
    pool.validate();
    return pool;
}

void save_router(const RouterPolicy& router, const std::filesystem::path& json_path) {
    router.validate();
    const std::string blob_name = sibling_name(json_path);
    json j = router_manifest(router, blob_name);
    std::ofstream f(json_path);
    if (!f) throw std::runtime_error("cannot open " + json_path.string());
    f << j.dump(2) << "\n";
    write_file(json_path.parent_path() / blob_name, router_blob_bytes(router));
}

RouterPolicy load_router(const std::filesystem::path& json_path) {
    std::ifstream f(json_path);
    if (!f) throw std::runtime_error("cannot open " + json_path.string());
    json j = json::parse(f);
    RouterPolicy r = router_from_manifest(j);
    const auto bytes = read_file(json_path.parent_path() / j.at("blob").get<std::string>());
    auto tensors = parse_blob_container(bytes, false, nullptr);
    if (tensors.size() != 1) throw std::runtime_error("router blob must hold one tensor");
    r.blob = std::move(tensors[0]);
    r.validate();
    return r;
}

// ---- secret sharing ----

std::pair<PartyArtifacts, PartyArtifacts>
secret_share_pool(const ModelPool& pool, const RouterPolicy& router,
                  std::mt19937_64& rng) {
    pool.validate();
    router.validate();
    PartyArtifacts a0, a1;
    a0.party = 0;
    a1.party = 1;
    a0.pool = pool;
    a1.pool = pool;
    a0.router = router;
    a1.router = router;

    const auto pool_bytes = pool_blob_bytes(pool);
    const auto router_bytes = router_blob_bytes(router);
    a0.pool_hash = a1.pool_hash = Sha256::digest(pool_bytes);
    a0.router_hash = a1.router_hash = Sha256::digest(router_bytes);

    const Ring ring{};
    for (std::size_t e = 0; e < pool.blobs.size(); e++) {
        auto& b0 = a0.pool.blobs[e];
        auto& b1 = a1.pool.blobs[e];
        for (std::size_t i = 0; i < pool.blobs[e].size(); i++) {
            const u64 s0 = rng();
            b0[i] = s0;
            b1[i] = ring.sub(pool.blobs[e][i], s0);
        }
    }
    for (std::size_t i = 0; i < router.blob.size(); i++) {
        const u64 s0 = rng();
        a0.router.blob[i] = s0;
        a1.router.blob[i] = ring.sub(router.blob[i], s0);
    }
    return {std::move(a0), std::move(a1)};
}

void save_party_artifacts(const PartyArtifacts& arts,
                          const std::filesystem::path& pool_json,
                          const std::filesystem::path& router_json) {
    {
        const std::string blob_name = sibling_name(pool_json);
        json j = pool_manifest(arts.pool, blob_name);
        j["format"] = "mpcroute-pool-share";
        j["party"] = arts.party;
        j["source_hash"] = hex(arts.pool_hash);
        std::ofstream f(pool_json);
        if (!f) throw std::runtime_error("cannot open " + pool_json.string());
        f << j.dump(2) << "\n";
        write_file(pool_json.parent_path() / blob_name,
                   blob_container(arts.pool.blobs, arts.pool.frac_bits, arts.party));
    }
    {
        const std::string blob_name = sibling_name(router_json);
        json j = router_manifest(arts.router, blob_name);
        j["format"] = "mpcroute-router-share";
        j["party"] = arts.party;
        j["source_hash"] = hex(arts.router_hash);
        std::ofstream f(router_json);
        if (!f) throw std::runtime_error("cannot open " + router_json.string());
        f << j.dump(2) << "\n";
        const std::vector<std::vector<u64>> one{arts.router.blob};
        write_file(router_json.parent_path() / blob_name,
                   blob_container(one, arts.router.frac_bits, arts.party));
    }
}

namespace {
std::array<u8, 32> parse_hash(const std::string& hx) {
    if (hx.size() != 64) throw std::runtime_error("bad hash length in manifest");
    std::array<u8, 32> out{};
    for (std::size_t i = 0; i < 32; i++)
        out[i] = static_cast<u8>(std::stoul(hx.substr(2 * i, 2), nullptr, 16));
    return out;
}
} // namespace

PartyArtifacts load_party_artifacts(const std::filesystem::path& pool_json,
                                    const std::filesystem::path& router_json) {
    PartyArtifacts arts;
    {
        std::ifstream f(pool_json);
        if (!f) throw std::runtime_error("cannot open " + pool_json.string());
        json j = json::parse(f);
        if (j.value("format", "") != "mpcroute-pool-share")
            throw std::runtime_error("not a pool share manifest");
        json plain = j;
        plain["format"] = "mpcroute-pool";
        arts.pool = pool_from_manifest(plain);
        arts.party = j.at("party").get<int>();
        arts.pool_hash = parse_hash(j.at("source_hash").get<std::string>());
        const auto bytes =
            read_file(pool_json.parent_path() / j.at("blob").get<std::string>());
        int party = -1;
        arts.pool.blobs = parse_blob_container(bytes, true, &party);
        if (party != arts.party)
            throw std::runtime_error("share blob party does not match manifest");
        arts.pool.validate();
    }
    {
        std::ifstream f(router_json);
        if (!f) throw std::runtime_error("cannot open " + router_json.string());
        json j = json::parse(f);
        if (j.value("format", "") != "mpcroute-router-share")
            throw std::runtime_error("not a router share manifest");
        json plain = j;
        plain["format"] = "mpcroute-router";
        arts.router = router_from_manifest(plain);
        if (j.at("party").get<int>() != arts.party)
            throw std::runtime_error("pool and router share files disagree on party");
        arts.router_hash = parse_hash(j.at("source_hash").get<std::string>());
        const auto bytes =
            read_file(router_json.parent_path() / j.at("blob").get<std::string>());
        int party = -1;
        auto tensors = parse_blob_container(bytes, true, &party);
        if (party != arts.party || tensors.size() != 1)
            throw std::runtime_error("bad router share blob");
        arts.router.blob = std::move(tensors[0]);
        arts.router.validate();
    }
    return arts;
}

// ---- padding ----

std::vector<u64> pad_expert_blob(std::span<const u64> blob,
                                 std::span<const std::size_t> actual_dims,
                                 std::span<const std::size_t> padded_dims) {
    if (actual_dims.size() != padded_dims.size())
        throw std::invalid_argument("padding requires uniform layer count");
    std::vector<u64> out(mlp_param_count(padded_dims), 0);
    std::size_t src = 0, dst = 0;
    for (std::size_t l = 0; l + 1 < actual_dims.size(); l++) {
        const std::size_t in_a = actual_dims[l], out_a = actual_dims[l + 1];
        const std::size_t in_p = padded_dims[l], out_p = padded_dims[l + 1];
        for (std::size_t r = 0; r < in_a; r++)
            for (std::size_t c = 0; c < out_a; c++)
                out[dst + r * out_p + c] = blob[src + r * out_a + c];
        src += in_a * out_a;
        dst += in_p * out_p;
        for (std::size_t c = 0; c < out_a; c++) out[dst + c] = blob[src + c];
        src += out_a;
        dst += out_p;
    }
    return out;
}

SharedTensor build_padded_pool_matrix(const PartyArtifacts& arts) {
    const auto padded = arts.pool.padded_layer_dims();
    const std::size_t P = mlp_param_count(padded);
    SharedTensor mat = SharedTensor::zeros(arts.party, {arts.pool.k(), P},
                                           arts.pool.frac_bits);
    for (std::size_t e = 0; e < arts.pool.k(); e++) {
        const auto dims = arts.pool.experts[e].layer_dims();
        const auto row = pad_expert_blob(arts.pool.blobs[e], dims, padded);
        std::copy(row.begin(), row.end(), mat.data.begin() + static_cast<std::ptrdiff_t>(e * P));
    }
    return mat;
}

// ---- plain fixed-point pipeline ----

std::vector<u64> plain_summary(std::span<const u64> embedding, std::size_t seq_len,
                               std::size_t embed_dim, const FixedPointCodec& codec) {
    if (embedding.size() != seq_len * embed_dim)
        throw std::invalid_argument("plain_summary: embedding size mismatch");
    const Ring ring = codec.ring;
    std::vector<u64> sum(embed_dim, 0);
    for (std::size_t s = 0; s < seq_len; s++)
        for (std::size_t j = 0; j < embed_dim; j++)
            sum[j] = ring.add(sum[j], embedding[s * embed_dim + j]);
    if (seq_len == 1) return sum;
    const u64 inv = codec.encode(1.0 / static_cast<double>(seq_len));
    for (auto& v : sum) v = codec.truncate(ring.mul(v, inv), codec.frac_bits);
    return sum;
}

std::vector<u64> plain_mlp_forward(std::span<const u64> input,
                                   std::span<const u64> params,
                                   std::span<const std::size_t> layer_dims,
                                   const FixedPointCodec& codec) {
    if (params.size() != mlp_param_count(layer_dims))
        throw std::invalid_argument("plain_mlp_forward: layout mismatch");
    if (input.size() != layer_dims[0])
        throw std::invalid_argument("plain_mlp_forward: input width mismatch");
    const Ring ring = codec.ring;
    std::vector<u64> act(input.begin(), input.end());
    std::size_t off = 0;
    for (std::size_t l = 0; l + 1 < layer_dims.size(); l++) {
        const std::size_t in = layer_dims[l], out_w = layer_dims[l + 1];
        std::vector<u64> next(out_w, 0);
        for (std::size_t j = 0; j < out_w; j++) {
            u64 acc = 0;
            for (std::size_t i = 0; i < in; i++)
                acc = ring.add(acc, ring.mul(act[i], params[off + i * out_w + j]));
            acc = codec.truncate(acc, codec.frac_bits);
            next[j] = ring.add(acc, params[off + in * out_w + j]);
        }
        off += in * out_w + out_w;
        if (l + 2 < layer_dims.size())
            for (auto& v : next)
                if (ring.to_signed(v) < 0) v = 0;
        act = std::move(next);
    }
    return act;
}

std::size_t plain_argmax_signed(std::span<const u64> v, Ring ring) {
    if (v.empty()) throw std::invalid_argument("argmax: empty input");
    std::size_t best = 0;
    for (std::size_t i = 1; i < v.size(); i++)
        if (ring.to_signed(v[i]) > ring.to_signed(v[best])) best = i;
    return best;
}

PlainRouted plain_routed_forward(const ModelPool& pool, const RouterPolicy& router,
                                 std::span<const u64> embedding) {
    const FixedPointCodec codec{Ring{}, pool.frac_bits};
    const auto summary = plain_summary(embedding, pool.seq_len, pool.embed_dim, codec);
    const auto rdims = router.layer_dims();
    const auto logits = plain_mlp_forward(summary, router.blob, rdims, codec);
    PlainRouted out;
    out.selected = plain_argmax_signed(logits, codec.ring);
    const auto edims = pool.experts[out.selected].layer_dims();
    out.logits_raw =
        plain_mlp_forward(embedding, pool.blobs[out.selected], edims, codec);
    out.logits = dequantize(out.logits_raw, codec);
    out.label = static_cast<int>(plain_argmax_signed(out.logits_raw, codec.ring));
    return out;
}

// ---- demo artifacts ----

std::pair<ModelPool, RouterPolicy> make_demo_artifacts(std::size_t k, u64 seed) {
    if (k < 2 || k > 5) throw std::invalid_argument("demo pool supports k in [2,5]");
    const std::size_t embed_dim = 4, classes = 2, seq_len = 1;
    const std::vector<std::string> names = {"tiny", "mini", "small", "base", "large"};
    const std::vector<std::size_t> widths = {16, 24, 32, 64, 256};
    const std::vector<double> costs = {2, 3, 4, 7, 13};

    // keep the extremes, fill the middle
    std::vector<std::size_t> pick;
    if (k == 2) pick = {0, 4};
    else if (k == 3) pick = {0, 3, 4};
    else if (k == 4) pick = {0, 2, 3, 4};
    else pick = {0, 1, 2, 3, 4};

    std::mt19937_64 rng(seed);
    auto init = [&](std::size_t n, double scale) {
        std::vector<double> w(n);
        std::uniform_real_distribution<double> dist(-scale, scale);
        for (auto& v : w) v = dist(rng);
        return w;
    };

    std::vector<ExpertSpec> specs;
    std::vector<std::vector<double>> params;
    for (std::size_t idx : pick) {
        ExpertSpec e;
        e.name = names[idx];
        e.input_dim = seq_len * embed_dim;
        e.hidden = {widths[idx]};
        e.classes = classes;
        e.cost = costs[idx];
        const double scale = 1.0 / std::sqrt(static_cast<double>(e.input_dim));
        specs.push_back(e);
        params.push_back(init(e.param_count(), scale));
    }
    ModelPool pool = build_pool(seq_len, embed_dim, classes, 16, specs, params);

    const std::size_t hidden = 8;
    const auto rw = init(mlp_param_count(std::vector<std::size_t>{embed_dim, hidden, k}),
                         1.0 / std::sqrt(static_cast<double>(embed_dim)));
    RouterPolicy router = build_router(embed_dim, hidden, k, 16, rw);
    return {std::move(pool), std::move(router)};
}

} // namespace mpcroute
