#include "mpcroute/profiler.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <thread>

#include <sys/resource.h>

#include <json.hpp>

#include "mpcroute/errors.hpp"

namespace mpcroute {

using nlohmann::json;

double speedup(std::size_t n, double c_baseline,
               std::span<const std::size_t> selections,
               std::span<const double> unit_latency, double c_router) {
    if (selections.empty()) throw std::invalid_argument("speedup: empty selections");
    if (n != selections.size())
        throw std::invalid_argument("speedup: N does not match selection count");
    if (!(c_baseline > 0)) throw std::invalid_argument("speedup: baseline latency must be > 0");
    for (double c : unit_latency)
        if (!(c > 0)) throw std::invalid_argument("speedup: latencies must be > 0");
    if (c_router < 0) throw std::invalid_argument("speedup: negative router cost");
    double denom = 0;
    for (std::size_t idx : selections) {
        if (idx >= unit_latency.size())
            throw std::invalid_argument("speedup: selection index out of range");
        denom += unit_latency[idx] + c_router;
    }
    return static_cast<double>(n) * c_baseline / denom;
}

u64 memory_high_water_bytes() {
    std::ifstream f("/proc/self/status");
    std::string line;
    while (std::getline(f, line)) {
        if (line.rfind("VmHWM:", 0) == 0) {
            unsigned long long kb = 0;
            std::sscanf(line.c_str(), "VmHWM: %llu", &kb);
            return static_cast<u64>(kb) * 1024;
        }
    }
    // kernels without VmHWM: fall back to the rusage high water
    rusage ru{};
    if (getrusage(RUSAGE_SELF, &ru) == 0 && ru.ru_maxrss > 0)
        return static_cast<u64>(ru.ru_maxrss) * 1024;
    return 0;
}

// ---- calibration harness ----

namespace {

// Runs fn(party, ctx) for both parties over fresh local channels and fresh
// seeded triple streams; rethrows the first failure.
template <typename Fn>
void run_pair(const ModelPool& pool, u64 triple_seed, Fn&& fn) {
    auto [c0, c1] = InProcChannel::make_pair();
    Transport t0(std::move(c0), true);
    Transport t1(std::move(c1), false);
    SeededTripleSource s0(triple_seed, 0);
    SeededTripleSource s1(triple_seed, 1);
    (void)pool;

    std::exception_ptr e0, e1;
    std::thread th([&] {
        try {
            SecureContext ctx{1, Ring{}, 16, &t1, &s1};
            fn(1, ctx, t1);
        } catch (...) {
            e1 = std::current_exception();
            t1.close();
        }
    });
    try {
        SecureContext ctx{0, Ring{}, 16, &t0, &s0};
        fn(0, ctx, t0);
    } catch (...) {
        e0 = std::current_exception();
        t0.close();
    }
    th.join();
    if (e0) std::rethrow_exception(e0);
    if (e1) std::rethrow_exception(e1);
}

double median(std::vector<double> v) {
    std::sort(v.begin(), v.end());
    return v[v.size() / 2];
}

std::pair<SharedTensor, SharedTensor> encode_and_share(const ModelPool& pool,
                                                       std::span<const double> sample,
                                                       u64 seed) {
    const FixedPointCodec codec{Ring{}, pool.frac_bits};
    std::vector<u64> enc(sample.size());
    for (std::size_t i = 0; i < enc.size(); i++) enc[i] = codec.encode(sample[i]);
    std::mt19937_64 rng(seed);
    return share_tensor(enc, {pool.seq_len, pool.embed_dim}, pool.frac_bits, rng);
}

} // namespace

CalibrationResult calibrate_expert_mpc(const ModelPool& pool,
                                       const RouterPolicy& router,
                                       std::size_t expert_index,
                                       std::span<const double> sample, u64 seed,
                                       int runs) {
    std::mt19937_64 share_rng(derive_seed(seed, 11));
    auto [a0, a1] = secret_share_pool(pool, router, share_rng);
    auto [e0, e1] = encode_and_share(pool, sample, derive_seed(seed, 12));
    const PartyArtifacts* arts[2] = {&a0, &a1};
    const SharedTensor* eshare[2] = {&e0, &e1};
    const auto dims = pool.experts[expert_index].layer_dims();

    std::vector<double> times;
    u64 bytes = 0;
    for (int r = 0; r < runs; r++) {
        const auto t0 = std::chrono::steady_clock::now();
        u64 run_bytes = 0;
        run_pair(pool, derive_seed(seed, 100 + static_cast<u64>(r)),
                 [&](int party, SecureContext& ctx, Transport& t) {
                     SharedTensor params;
                     params.party = party;
                     params.scale = pool.frac_bits;
                     params.shape = {arts[party]->pool.blobs[expert_index].size()};
                     params.data = arts[party]->pool.blobs[expert_index];
                     SharedTensor x = *eshare[party];
                     x.shape = {1, pool.seq_len * pool.embed_dim};
                     SharedTensor y = secure_expert_forward(ctx, x, params, dims);
                     (void)y;
                     if (party == 0)
                         run_bytes = t.stats().bytes_sent + t.stats().bytes_received;
                 });
        times.push_back(std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count());
        bytes = run_bytes;
    }
    return {median(std::move(times)), bytes};
}

CalibrationResult calibrate_router_mpc(const ModelPool& pool,
                                       const RouterPolicy& router, ExecMode mode,
                                       std::span<const double> sample, u64 seed,
                                       int runs) {
    std::mt19937_64 share_rng(derive_seed(seed, 21));
    auto [a0, a1] = secret_share_pool(pool, router, share_rng);
    auto [e0, e1] = encode_and_share(pool, sample, derive_seed(seed, 22));
    const PartyArtifacts* arts[2] = {&a0, &a1};
    const SharedTensor* eshare[2] = {&e0, &e1};
    const FixedPointCodec codec{Ring{}, pool.frac_bits};

    std::vector<double> times;
    u64 bytes = 0;
    for (int r = 0; r < runs; r++) {
        const auto t0 = std::chrono::steady_clock::now();
        u64 run_bytes = 0;
        run_pair(pool, derive_seed(seed, 200 + static_cast<u64>(r)),
                 [&](int party, SecureContext& ctx, Transport& t) {
                     const auto& arts_p = *arts[party];
                     // summary
                     SharedTensor summary = SharedTensor::zeros(
                         party, {1, pool.embed_dim}, pool.frac_bits);
                     for (std::size_t s = 0; s < pool.seq_len; s++)
                         for (std::size_t j = 0; j < pool.embed_dim; j++)
                             summary.data[j] = ctx.ring.add(
                                 summary.data[j],
                                 eshare[party]->data[s * pool.embed_dim + j]);
                     if (pool.seq_len > 1) {
                         const u64 inv =
                             codec.encode(1.0 / static_cast<double>(pool.seq_len));
                         summary = scale_public(summary, inv, pool.frac_bits);
                         summary = truncate_shares(summary, pool.frac_bits);
                     }
                     SharedTensor rp;
                     rp.party = party;
                     rp.scale = pool.frac_bits;
                     rp.shape = {arts_p.router.blob.size()};
                     rp.data = arts_p.router.blob;
                     const auto rdims = arts_p.router.layer_dims();
                     SharedTensor logits = secure_expert_forward(ctx, summary, rp, rdims);
                     SharedTensor onehot = secure_argmax(ctx, logits);
                     if (mode == ExecMode::Revealed) {
                         (void)open_index(ctx, onehot);
                     } else {
                         const SharedTensor padded = build_padded_pool_matrix(arts_p);
                         (void)oblivious_select(ctx, onehot, padded);
                     }
                     if (party == 0)
                         run_bytes = t.stats().bytes_sent + t.stats().bytes_received;
                 });
        times.push_back(std::chrono::duration<double>(
                            std::chrono::steady_clock::now() - t0)
                            .count());
        bytes = run_bytes;
    }
    return {median(std::move(times)), bytes};
}

// ---- full pipeline profile ----

ProfileReport profile_pipeline(const ModelPool& pool, const RouterPolicy& router,
                               std::span<const std::vector<double>> samples,
                               ExecMode mode, u64 seed) {
    if (samples.empty()) throw std::invalid_argument("profile: no samples");
    ProfileReport rep;
    rep.mode = mode;
    rep.n_samples = samples.size();
    rep.baseline_index = pool.baseline_index();
    for (const auto& e : pool.experts) rep.expert_names.push_back(e.name);

    const auto& calib_sample = samples.front();
    for (std::size_t i = 0; i < pool.k(); i++) {
        const auto c = calibrate_expert_mpc(pool, router, i, calib_sample,
                                            derive_seed(seed, 1000 + i));
        rep.expert_latency.push_back(c.seconds);
        rep.expert_bytes.push_back(c.bytes);
    }
    const auto rc = calibrate_router_mpc(pool, router, mode, calib_sample,
                                         derive_seed(seed, 2000));
    rep.router_latency = rc.seconds;
    rep.router_bytes = rc.bytes;

    // routed pipeline over the sample set (one session)
    const SimulateReport sim = simulate(pool, router, samples, mode, seed);
    rep.totals0 = sim.party0;
    rep.totals1 = sim.party1;
    rep.routed_bytes_per_sample =
        static_cast<double>(sim.party0.total.bytes_sent +
                            sim.party0.total.bytes_received) /
        static_cast<double>(samples.size());

    // selection distribution: opened selections in revealed mode, plaintext
    // routing otherwise (the profiler owns the plaintext artifacts)
    std::vector<std::size_t> selections;
    if (mode == ExecMode::Revealed && !sim.selections.empty()) {
        selections = sim.selections;
    } else {
        const FixedPointCodec codec{Ring{}, pool.frac_bits};
        for (const auto& s : samples) {
            std::vector<u64> enc(s.size());
            for (std::size_t i = 0; i < s.size(); i++) enc[i] = codec.encode(s[i]);
            selections.push_back(plain_routed_forward(pool, router, enc).selected);
        }
    }
    rep.selection_dist.assign(pool.k(), 0.0);
    for (std::size_t s : selections) rep.selection_dist[s] += 1.0;
    for (auto& v : rep.selection_dist) v /= static_cast<double>(selections.size());

    rep.speedup = speedup(selections.size(), rep.expert_latency[rep.baseline_index],
                          selections, rep.expert_latency, rep.router_latency);
    rep.mem_high_water = memory_high_water_bytes();
    return rep;
}

// ---- reports ----

namespace {
json stats_json(const CommStats& s) {
    json j;
    j["bytes_sent"] = s.total.bytes_sent;
    j["bytes_received"] = s.total.bytes_received;
    j["rounds"] = s.total.rounds;
    json phases = json::object();
    for (const auto& [k, v] : s.phases)
        phases[k] = {{"bytes_sent", v.bytes_sent},
                     {"bytes_received", v.bytes_received},
                     {"rounds", v.rounds}};
    j["phases"] = phases;
    return j;
}
} // namespace

void write_profile_json(const ProfileReport& rep, const std::filesystem::path& path) {
    json j;
    j["mode"] = to_string(rep.mode);
    j["n_samples"] = rep.n_samples;
    j["experts"] = rep.expert_names;
    j["expert_latency_s"] = rep.expert_latency;
    j["expert_bytes"] = rep.expert_bytes;
    j["router_latency_s"] = rep.router_latency;
    j["router_bytes"] = rep.router_bytes;
    j["selection_dist"] = rep.selection_dist;
    j["baseline_index"] = rep.baseline_index;
    j["speedup"] = rep.speedup;
    j["mem_high_water_bytes"] = rep.mem_high_water;
    j["routed_bytes_per_sample"] = rep.routed_bytes_per_sample;
    j["party0"] = stats_json(rep.totals0);
    j["party1"] = stats_json(rep.totals1);
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    f << j.dump(2) << "\n";
}

void write_profile_csv(const ProfileReport& rep, const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    f << "expert,latency_s,bytes,selection_frac\n";
    char buf[64];
    for (std::size_t i = 0; i < rep.expert_names.size(); i++) {
        std::snprintf(buf, sizeof(buf), "%.6g", rep.expert_latency[i]);
        f << rep.expert_names[i] << "," << buf << "," << rep.expert_bytes[i];
        std::snprintf(buf, sizeof(buf), "%.6g", rep.selection_dist[i]);
        f << "," << buf << "\n";
    }
    std::snprintf(buf, sizeof(buf), "%.6g", rep.router_latency);
    f << "router," << buf << "," << rep.router_bytes << ",\n";
    std::snprintf(buf, sizeof(buf), "%.6g", rep.speedup);
    f << "speedup," << buf << ",,\n";
}

void render_profile_table(const ProfileReport& rep, std::ostream& os) {
    os << "model        latency(s)   bytes        route%\n";
    char line[160];
    for (std::size_t i = 0; i < rep.expert_names.size(); i++) {
        std::snprintf(line, sizeof(line), "%-12s %-12.6f %-12llu %5.1f%s\n",
                      rep.expert_names[i].c_str(), rep.expert_latency[i],
                      static_cast<unsigned long long>(rep.expert_bytes[i]),
                      100.0 * rep.selection_dist[i],
                      i == rep.baseline_index ? "  (baseline)" : "");
        os << line;
    }
    std::snprintf(line, sizeof(line), "%-12s %-12.6f %-12llu\n", "router",
                  rep.router_latency,
                  static_cast<unsigned long long>(rep.router_bytes));
    os << line;
    std::snprintf(line, sizeof(line),
                  "speed-up %.4fx over always-%s; routed bytes/sample %.0f; "
                  "mem HWM %.1f MB\n",
                  rep.speedup, rep.expert_names[rep.baseline_index].c_str(),
                  rep.routed_bytes_per_sample,
                  static_cast<double>(rep.mem_high_water) / (1024.0 * 1024.0));
    os << line;
}

// ---- experiments ----

namespace {

struct LadderEntry {
    const char* name;
    std::size_t width;
    double cost;
};

// tiny..large capacity ladder with the appendix cost units
constexpr LadderEntry kLadder[5] = {{"tiny", 0, 2.0},
                                    {"mini", 2, 3.0},
                                    {"small", 3, 4.0},
                                    {"base", 4, 7.0},
                                    {"large", 24, 13.0}};

std::vector<std::size_t> ladder_pick(std::size_t K) {
    switch (K) {
    case 2: return {0, 4};
    case 3: return {0, 3, 4};
    case 4: return {0, 2, 3, 4};
    case 5: return {0, 1, 2, 3, 4};
    default: throw std::invalid_argument("scalability supports K in {2..5}");
    }
}

std::vector<ExpertSpec> ladder_experts(std::span<const std::size_t> pick) {
    std::vector<ExpertSpec> out;
    for (std::size_t idx : pick) {
        ExpertSpec e;
        e.name = kLadder[idx].name;
        if (kLadder[idx].width > 0) e.hidden = {kLadder[idx].width};
        e.cost = kLadder[idx].cost;
        out.push_back(std::move(e));
    }
    return out;
}

Dataset held_out(const TrainSpec& spec) {
    DatasetConfig cfg = spec.dataset;
    cfg.n = std::max<std::size_t>(cfg.n / 4, 64);
    cfg.seed = derive_seed(cfg.seed, 0xeda7);
    return make_synthetic_dataset(cfg);
}

} // namespace

std::vector<ScalabilityRow> experiment_scalability(const TrainSpec& base,
                                                   std::span<const std::size_t> Ks,
                                                   u64 seed) {
    std::vector<ScalabilityRow> rows;
    const Dataset train_data = make_synthetic_dataset(base.dataset);
    const Dataset test_data = held_out(base);
    for (std::size_t K : Ks) {
        TrainSpec spec = base;
        spec.experts = ladder_experts(ladder_pick(K));
        const TrainOutput out =
            train(train_data, spec.experts, spec.router_hidden, spec.train);
        const EvalResult ev =
            evaluate_routed_quantized(out.pool_q, out.router_q, test_data);

        // measured MPC unit latencies for the speed-up formula
        std::vector<double> unit;
        for (std::size_t i = 0; i < out.pool_q.k(); i++)
            unit.push_back(calibrate_expert_mpc(out.pool_q, out.router_q, i,
                                                test_data.x.front(),
                                                derive_seed(seed, 3000 + i), 3)
                               .seconds);
        const double router_cost =
            calibrate_router_mpc(out.pool_q, out.router_q, ExecMode::Revealed,
                                 test_data.x.front(), derive_seed(seed, 3100), 3)
                .seconds;
        std::vector<std::size_t> selections;
        const FixedPointCodec codec{Ring{}, out.pool_q.frac_bits};
        for (const auto& s : test_data.x) {
            std::vector<u64> enc(s.size());
            for (std::size_t i = 0; i < s.size(); i++) enc[i] = codec.encode(s[i]);
            selections.push_back(
                plain_routed_forward(out.pool_q, out.router_q, enc).selected);
        }
        ScalabilityRow row;
        row.K = K;
        row.costs = out.pool_q.costs();
        row.accuracy = ev.accuracy;
        row.f1 = ev.macro_f1;
        row.speedup = speedup(selections.size(),
                              unit[out.pool_q.baseline_index()], selections, unit,
                              router_cost);
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_scalability_csv(std::span<const ScalabilityRow> rows,
                           const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    f << "K,costs,accuracy,f1,speedup\n";
    char buf[64];
    for (const auto& r : rows) {
        f << r.K << ",\"[";
        for (std::size_t i = 0; i < r.costs.size(); i++) {
            std::snprintf(buf, sizeof(buf), "%g", r.costs[i]);
            f << (i ? ", " : "") << buf;
        }
        f << "]\"";
        std::snprintf(buf, sizeof(buf), "%.4f", r.accuracy);
        f << "," << buf;
        std::snprintf(buf, sizeof(buf), "%.4f", r.f1);
        f << "," << buf;
        std::snprintf(buf, sizeof(buf), "%.4f", r.speedup);
        f << "," << buf << "\n";
    }
}

std::vector<std::pair<std::string, std::vector<double>>> cost_profiles() {
    return {{"Baseline", {2, 7, 13}},
            {"Scale_x0.7", {1.4, 4.9, 9.1}},
            {"Scale_x1.5", {3, 10.5, 19.5}},
            {"Flat", {5.1, 7.3, 9.5}},
            {"Steep", {1, 7, 19.5}},
            {"Reversed", {13, 7, 2}}};
}

std::vector<CostProfileRow> experiment_cost_sensitivity(const TrainSpec& base,
                                                        u64 seed) {
    (void)seed;
    std::vector<CostProfileRow> rows;
    const Dataset train_data = make_synthetic_dataset(base.dataset);
    const Dataset test_data = held_out(base);
    for (const auto& [name, costs] : cost_profiles()) {
        TrainSpec spec = base;
        // width-1 mid expert: its ceiling on the hard tier is architectural,
        // so the capacity gap to the large expert survives any training budget
        spec.experts = {ExpertSpec{"tiny", 0, {}, 0, costs[0]},
                        ExpertSpec{"base", 0, {1}, 0, costs[1]},
                        ExpertSpec{"large", 0, {24}, 0, costs[2]}};
        const TrainOutput out =
            train(train_data, spec.experts, spec.router_hidden, spec.train);
        const EvalResult ev =
            evaluate_routed_quantized(out.pool_q, out.router_q, test_data);
        CostProfileRow row;
        row.profile = name;
        row.costs = costs;
        row.accuracy = ev.accuracy;
        row.f1 = ev.macro_f1;
        row.route_frac = ev.route_frac;
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_cost_sensitivity_csv(std::span<const CostProfileRow> rows,
                                const std::filesystem::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    if (rows.empty()) return;
    f << "profile,costs,accuracy,f1";
    for (std::size_t i = 1; i <= rows.front().route_frac.size(); i++)
        f << ",route_pct_" << i;
    f << "\n";
    char buf[64];
    for (const auto& r : rows) {
        f << r.profile << ",\"[";
        for (std::size_t i = 0; i < r.costs.size(); i++) {
            std::snprintf(buf, sizeof(buf), "%g", r.costs[i]);
            f << (i ? ", " : "") << buf;
        }
        f << "]\"";
        std::snprintf(buf, sizeof(buf), "%.4f", r.accuracy);
        f << "," << buf;
        std::snprintf(buf, sizeof(buf), "%.4f", r.f1);
        f << "," << buf;
        for (double v : r.route_frac) {
            std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
            f << "," << buf;
        }
        f << "\n";
    }
}

} // namespace mpcroute
