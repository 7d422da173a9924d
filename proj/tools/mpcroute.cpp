// Operator CLI: dealer, training, artifact sharing, the distributed roles,
// single-process simulation, benchmarking and the experiment harnesses.

#include <filesystem>
#include <fstream>
#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "mpcroute/profiler.hpp"

namespace fs = std::filesystem;
using namespace mpcroute;
using nlohmann::json;

namespace {

struct HostPort {
    std::string host;
    u16 port = 0;
};

HostPort parse_hostport(const std::string& s) {
    const auto pos = s.rfind(':');
    if (pos == std::string::npos)
        throw std::runtime_error("address must be host:port");
    HostPort hp;
    hp.host = s.substr(0, pos);
    hp.port = static_cast<u16>(std::stoul(s.substr(pos + 1)));
    if (hp.host.empty() || hp.port == 0)
        throw std::runtime_error("address must be host:port");
    return hp;
}

// Public pool metadata (shapes only); accepts plaintext or share manifests.
struct PoolMeta {
    std::size_t seq_len = 1, embed_dim = 0, classes = 0;
    int frac_bits = 16;
};

PoolMeta load_pool_meta(const fs::path& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    json j = json::parse(f);
    PoolMeta m;
    m.seq_len = j.at("seq_len").get<std::size_t>();
    m.embed_dim = j.at("embed_dim").get<std::size_t>();
    m.classes = j.at("classes").get<std::size_t>();
    m.frac_bits = j.at("frac_bits").get<int>();
    return m;
}

std::vector<std::vector<double>> synthetic_samples(std::size_t n,
                                                   std::size_t seq_len,
                                                   std::size_t embed_dim,
                                                   std::size_t classes, u64 seed) {
    DatasetConfig cfg;
    cfg.n = n;
    cfg.seq_len = seq_len;
    cfg.embed_dim = embed_dim;
    cfg.classes = classes;
    cfg.seed = seed;
    return make_synthetic_dataset(cfg).x;
}

json stats_to_json(const CommStats& s) {
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

json simulate_report_json(const SimulateReport& rep) {
    // deterministic fields only; wall time goes to stdout instead
    json j;
    j["mode"] = to_string(rep.mode);
    j["samples"] = rep.labels.size();
    j["labels"] = rep.labels;
    j["logits"] = rep.logits;
    j["selections"] = rep.selections;
    j["party0"] = stats_to_json(rep.party0);
    j["party1"] = stats_to_json(rep.party1);
    j["triples"] = {{"arith0", rep.arith0},
                    {"bool0", rep.bool0},
                    {"arith1", rep.arith1},
                    {"bool1", rep.bool1}};
    j["transcripts"] = {{"p0_peer", rep.transcript01},
                        {"p1_peer", rep.transcript10},
                        {"p0_client", rep.transcript_c0},
                        {"p1_client", rep.transcript_c1}};
    return j;
}

void write_json(const json& j, const fs::path& path) {
    std::ofstream f(path);
    if (!f) throw std::runtime_error("cannot open " + path.string());
    f << j.dump(2) << "\n";
}

int cmd_dealer(u64 seed, std::size_t n_arith, std::size_t n_bool,
               const std::string& pool_path, const std::string& router_path,
               const std::string& mode_str, std::size_t samples,
               const fs::path& out_dir, const std::string& basename) {
    if (!pool_path.empty()) {
        const ModelPool pool = load_pool(pool_path);
        const RouterPolicy router = load_router(router_path);
        const TripleBudget per =
            estimate_inference_budget(pool, router, exec_mode_from_string(mode_str));
        n_arith = per.arith * samples;
        n_bool = per.boolean * samples;
        std::cout << "budget: " << per.arith << " arith + " << per.boolean
                  << " bool per inference, " << samples << " samples\n";
    }
    fs::create_directories(out_dir);
    std::mt19937_64 rng(seed);
    const DealerOutput out = dealer_generate(n_arith, n_bool, rng);
    for (int p = 0; p < 2; p++) {
        const fs::path path =
            out_dir / (basename + ".p" + std::to_string(p) + ".bin");
        write_triple_file(path, out.arith[static_cast<std::size_t>(p)],
                          out.boolean[static_cast<std::size_t>(p)]);
        std::cout << "wrote " << path.string() << " (" << n_arith << " arith, "
                  << n_bool << " bool)\n";
    }
    return 0;
}

int cmd_train(u64 seed, const std::string& config_path, const fs::path& out_dir) {
    TrainSpec spec =
        config_path.empty() ? default_train_spec() : load_train_spec(config_path);
    spec.train.seed = seed;
    spec.dataset.seed = derive_seed(seed, 0xda7a);
    fs::create_directories(out_dir);

    const Dataset data = make_synthetic_dataset(spec.dataset);
    const TrainOutput out = train(data, spec.experts, spec.router_hidden, spec.train);
    save_pool(out.pool_q, out_dir / "pool.json");
    save_router(out.router_q, out_dir / "router.json");
    write_history_csv(out.history, out_dir / "history.csv");

    const EvalResult ev = evaluate_routed_quantized(out.pool_q, out.router_q, data);
    std::cout << "trained " << out.pool_q.k() << " experts, train accuracy "
              << ev.accuracy << ", route fractions [";
    for (std::size_t i = 0; i < ev.route_frac.size(); i++)
        std::cout << (i ? ", " : "") << ev.route_frac[i];
    std::cout << "]\nartifacts in " << out_dir.string() << "\n";
    return 0;
}

int cmd_share_pool(u64 seed, const fs::path& pool_path, const fs::path& router_path,
                   const fs::path& out_dir) {
    const ModelPool pool = load_pool(pool_path);
    const RouterPolicy router = load_router(router_path);
    fs::create_directories(out_dir);
    std::mt19937_64 rng(seed);
    auto [a0, a1] = secret_share_pool(pool, router, rng);
    save_party_artifacts(a0, out_dir / "pool.p0.json", out_dir / "router.p0.json");
    save_party_artifacts(a1, out_dir / "pool.p1.json", out_dir / "router.p1.json");
    std::cout << "share files in " << out_dir.string() << "\n";
    return 0;
}

int cmd_party(int id, const fs::path& pool_path, const fs::path& router_path,
              const fs::path& triples_path, const std::string& mode_str,
              u16 listen_port, const std::string& connect_addr, u16 client_port) {
    const PartyArtifacts arts = load_party_artifacts(pool_path, router_path);
    if (arts.party != id)
        throw std::runtime_error("share files belong to party " +
                                 std::to_string(arts.party));
    auto [arith, boolean] = read_triple_file(triples_path);
    VectorTripleSource triples(std::move(arith), std::move(boolean));
    const ExecMode mode = exec_mode_from_string(mode_str);

    std::unique_ptr<Channel> peer_ch;
    if (id == 0) {
        std::cout << "party 0 waiting for peer on port " << listen_port << "\n";
        peer_ch = SocketChannel::listen_accept(listen_port);
    } else {
        const HostPort hp = parse_hostport(connect_addr);
        peer_ch = SocketChannel::connect_to(hp.host, hp.port);
    }
    std::cout << "party " << id << " waiting for client on port " << client_port
              << "\n";
    std::unique_ptr<Channel> client_ch = SocketChannel::listen_accept(client_port);

    Transport peer(std::move(peer_ch), id == 0);
    Transport client(std::move(client_ch), true);
    const PartyRunResult res = run_party(arts, mode, peer, client, triples);

    json j;
    j["party"] = id;
    j["stats"] = stats_to_json(res.stats);
    j["triples"] = {{"arith", res.arith_consumed}, {"bool", res.bool_consumed}};
    j["selections"] = res.selections;
    j["peer_transcript"] = hex(res.peer_transcript);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_client(u64 seed, const std::string& p0_addr, const std::string& p1_addr,
               const fs::path& manifest, const std::string& mode_str,
               std::size_t samples, const fs::path& report_dir) {
    const PoolMeta meta = load_pool_meta(manifest);
    const auto xs = synthetic_samples(samples, meta.seq_len, meta.embed_dim,
                                      meta.classes, derive_seed(seed, 7));
    const HostPort hp0 = parse_hostport(p0_addr);
    const HostPort hp1 = parse_hostport(p1_addr);
    Transport p0(SocketChannel::connect_to(hp0.host, hp0.port), false);
    Transport p1(SocketChannel::connect_to(hp1.host, hp1.port), false);
    const ClientRunResult res =
        run_client(xs, meta.seq_len, meta.embed_dim, meta.frac_bits,
                   exec_mode_from_string(mode_str), derive_seed(seed, 3), p0, p1);
    json j;
    j["labels"] = json::array();
    for (const auto& r : res.results) j["labels"].push_back(r.label);
    j["p0_transcript"] = hex(res.p0_transcript);
    j["p1_transcript"] = hex(res.p1_transcript);
    std::cout << j.dump(2) << "\n";
    if (!report_dir.empty()) {
        fs::create_directories(report_dir);
        write_json(j, report_dir / "client.json");
    }
    return 0;
}

// Two-process convenience topology: this process plays both the client and
// party 0. Weaker separation than the three-process deployment, since one
// process then holds the input and one share of everything.
int cmd_duo(u64 seed, const fs::path& pool_path, const fs::path& router_path,
            const fs::path& triples_path, const std::string& mode_str,
            u16 listen_port, const std::string& party1_client_addr,
            std::size_t samples) {
    const PartyArtifacts arts = load_party_artifacts(pool_path, router_path);
    if (arts.party != 0) throw std::runtime_error("duo role needs party-0 shares");
    auto [arith, boolean] = read_triple_file(triples_path);
    VectorTripleSource triples(std::move(arith), std::move(boolean));
    const ExecMode mode = exec_mode_from_string(mode_str);

    std::cout << "duo waiting for party 1 on port " << listen_port << "\n";
    Transport peer(SocketChannel::listen_accept(listen_port), true);
    auto [cli_end, party_end] = InProcChannel::make_pair();
    Transport p0_client(std::move(party_end), true);
    Transport c0(std::move(cli_end), false);
    const HostPort hp = parse_hostport(party1_client_addr);
    Transport c1(SocketChannel::connect_to(hp.host, hp.port), false);

    const auto xs = synthetic_samples(samples, arts.pool.seq_len,
                                      arts.pool.embed_dim, arts.pool.classes,
                                      derive_seed(seed, 7));
    PartyRunResult pres;
    std::exception_ptr perr;
    std::thread party_thread([&] {
        try {
            pres = run_party(arts, mode, peer, p0_client, triples);
        } catch (...) {
            perr = std::current_exception();
            peer.close();
            p0_client.close();
        }
    });
    ClientRunResult cres;
    std::exception_ptr cerr_;
    try {
        cres = run_client(xs, arts.pool.seq_len, arts.pool.embed_dim,
                          arts.pool.frac_bits, mode, derive_seed(seed, 3), c0, c1);
    } catch (...) {
        cerr_ = std::current_exception();
        c0.close();
        c1.close();
    }
    party_thread.join();
    if (perr) std::rethrow_exception(perr);
    if (cerr_) std::rethrow_exception(cerr_);

    json j;
    j["labels"] = json::array();
    for (const auto& r : cres.results) j["labels"].push_back(r.label);
    j["party0"] = stats_to_json(pres.stats);
    std::cout << j.dump(2) << "\n";
    return 0;
}

int cmd_simulate(u64 seed, const std::string& pool_path,
                 const std::string& router_path, std::size_t demo_k,
                 const std::string& mode_str, std::size_t samples,
                 const fs::path& report_dir) {
    ModelPool pool;
    RouterPolicy router;
    if (pool_path.empty()) {
        std::tie(pool, router) = make_demo_artifacts(demo_k, derive_seed(seed, 9));
        std::cout << "using bundled demo pool (" << demo_k << " experts)\n";
    } else {
        pool = load_pool(pool_path);
        router = load_router(router_path);
    }
    const auto xs = synthetic_samples(samples, pool.seq_len, pool.embed_dim,
                                      pool.classes, derive_seed(seed, 7));
    const SimulateReport rep =
        simulate(pool, router, xs, exec_mode_from_string(mode_str), seed);

    for (std::size_t i = 0; i < rep.labels.size(); i++) {
        std::cout << "sample " << i << ": label " << rep.labels[i];
        if (i < rep.selections.size())
            std::cout << " (expert " << pool.experts[rep.selections[i]].name << ")";
        std::cout << "\n";
    }
    std::cout << "phase        bytes(sent)  rounds\n";
    for (const auto& [phase, ctr] : rep.party0.phases)
        std::cout << phase << std::string(13 - std::min<std::size_t>(12, phase.size()), ' ')
                  << ctr.bytes_sent << std::string(13 - std::min<std::size_t>(12, std::to_string(ctr.bytes_sent).size()), ' ')
                  << ctr.rounds << "\n";
    if (!rep.selections.empty()) {
        std::vector<std::size_t> counts(pool.k(), 0);
        for (std::size_t s : rep.selections) counts[s]++;
        std::cout << "selection distribution:";
        for (std::size_t i = 0; i < pool.k(); i++)
            std::cout << " " << pool.experts[i].name << "="
                      << (100.0 * static_cast<double>(counts[i]) /
                          static_cast<double>(rep.selections.size()))
                      << "%";
        std::cout << "\n";
    }
    std::cout << "triples consumed: " << rep.arith0 << " arith, " << rep.bool0
              << " bool per party\n";
    std::cout << "bytes p0 sent/recv: " << rep.party0.total.bytes_sent << "/"
              << rep.party0.total.bytes_received
              << ", rounds: " << rep.party0.total.rounds << ", mem HWM "
              << memory_high_water_bytes() / (1024 * 1024) << " MB, wall "
              << rep.seconds << "s\n";
    if (!report_dir.empty()) {
        fs::create_directories(report_dir);
        write_json(simulate_report_json(rep), report_dir / "report.json");
        std::cout << "report: " << (report_dir / "report.json").string() << "\n";
    }
    return 0;
}

int cmd_bench(u64 seed, const fs::path& pool_path, const fs::path& router_path,
              const std::string& mode_str, std::size_t samples,
              const fs::path& report_dir) {
    const ModelPool pool = load_pool(pool_path);
    const RouterPolicy router = load_router(router_path);
    const auto xs = synthetic_samples(samples, pool.seq_len, pool.embed_dim,
                                      pool.classes, derive_seed(seed, 7));
    const ProfileReport rep =
        profile_pipeline(pool, router, xs, exec_mode_from_string(mode_str), seed);
    render_profile_table(rep, std::cout);
    if (!report_dir.empty()) {
        fs::create_directories(report_dir);
        write_profile_json(rep, report_dir / "profile.json");
        write_profile_csv(rep, report_dir / "profile.csv");
        std::cout << "reports in " << report_dir.string() << "\n";
    }
    return 0;
}

int cmd_experiment(const std::string& which, u64 seed,
                   const std::string& config_path, const fs::path& report_dir) {
    TrainSpec spec =
        config_path.empty() ? default_train_spec() : load_train_spec(config_path);
    spec.train.seed = seed;
    spec.dataset.seed = derive_seed(seed, 0xda7a);
    fs::create_directories(report_dir);
    if (which == "scalability") {
        const std::vector<std::size_t> Ks = {2, 3, 4, 5};
        const auto rows = experiment_scalability(spec, Ks, seed);
        write_scalability_csv(rows, report_dir / "scalability.csv");
        std::cout << "K,costs,accuracy,f1,speedup\n";
        for (const auto& r : rows) {
            std::cout << r.K << ",[";
            for (std::size_t i = 0; i < r.costs.size(); i++)
                std::cout << (i ? " " : "") << r.costs[i];
            std::cout << "]," << r.accuracy << "," << r.f1 << "," << r.speedup
                      << "\n";
        }
    } else {
        const auto rows = experiment_cost_sensitivity(spec, seed);
        write_cost_sensitivity_csv(rows, report_dir / "cost_sensitivity.csv");
        std::cout << "profile,accuracy,f1,route%\n";
        for (const auto& r : rows) {
            std::cout << r.profile << "," << r.accuracy << "," << r.f1 << ",[";
            for (std::size_t i = 0; i < r.route_frac.size(); i++)
                std::cout << (i ? " " : "") << 100.0 * r.route_frac[i];
            std::cout << "]\n";
        }
    }
    std::cout << "csv in " << report_dir.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"two-party secure routed inference engine"};
    app.require_subcommand(1);

    // all randomness flows from explicit seeds
    u64 seed = 0;

    auto* dealer = app.add_subcommand("dealer", "generate correlated randomness files");
    std::size_t n_arith = 0, n_bool = 0, samples = 1;
    std::string pool_path, router_path, mode_str = "revealed";
    std::string out_dir = ".", basename = "triples";
    dealer->add_option("--seed", seed, "rng seed")->required();
    dealer->add_option("--arith", n_arith, "arithmetic triple count");
    dealer->add_option("--bool", n_bool, "boolean triple count");
    dealer->add_option("--pool", pool_path, "size from this pool manifest");
    dealer->add_option("--router", router_path, "router manifest (with --pool)");
    dealer->add_option("--mode", mode_str, "revealed|oblivious")
        ->check(CLI::IsMember({"revealed", "oblivious"}));
    dealer->add_option("--samples", samples, "inference count (with --pool)");
    dealer->add_option("--out", out_dir, "output directory");
    dealer->add_option("--basename", basename, "file basename");

    auto* train_cmd = app.add_subcommand("train", "train router and expert pool");
    std::string config_path;
    train_cmd->add_option("--seed", seed, "rng seed")->required();
    train_cmd->add_option("--config", config_path, "training spec JSON");
    train_cmd->add_option("--out", out_dir, "output directory")->required();

    auto* share = app.add_subcommand("share-pool", "secret-share trained artifacts");
    share->add_option("--seed", seed, "rng seed")->required();
    share->add_option("--pool", pool_path, "pool manifest")->required();
    share->add_option("--router", router_path, "router manifest")->required();
    share->add_option("--out", out_dir, "output directory")->required();

    auto* party = app.add_subcommand("party", "run one compute party (sockets)");
    int party_id = 0;
    u16 listen_port = 0, client_port = 0;
    std::string connect_addr, triples_path;
    party->add_option("--id", party_id, "party id")->required()->check(CLI::Range(0, 1));
    party->add_option("--pool", pool_path, "pool share manifest")->required();
    party->add_option("--router", router_path, "router share manifest")->required();
    party->add_option("--triples", triples_path, "triple file")->required();
    party->add_option("--mode", mode_str, "revealed|oblivious")
        ->check(CLI::IsMember({"revealed", "oblivious"}));
    party->add_option("--listen", listen_port, "peer port (party 0)");
    party->add_option("--connect", connect_addr, "party 0 address (party 1)");
    party->add_option("--client-port", client_port, "client port")->required();

    auto* client = app.add_subcommand("client", "run the client (sockets)");
    std::string p0_addr, p1_addr, report_dir;
    client->add_option("--seed", seed, "rng seed")->required();
    client->add_option("--party0", p0_addr, "party 0 host:port")->required();
    client->add_option("--party1", p1_addr, "party 1 host:port")->required();
    client->add_option("--pool", pool_path, "pool manifest (public metadata)")
        ->required();
    client->add_option("--mode", mode_str, "revealed|oblivious")
        ->check(CLI::IsMember({"revealed", "oblivious"}));
    client->add_option("--samples", samples, "sample count");
    client->add_option("--report", report_dir, "report directory");

    auto* duo = app.add_subcommand("duo", "client and party 0 in one process");
    std::string party1_client;
    duo->add_option("--seed", seed, "rng seed")->required();
    duo->add_option("--pool", pool_path, "party-0 pool share manifest")->required();
    duo->add_option("--router", router_path, "party-0 router share manifest")->required();
    duo->add_option("--triples", triples_path, "party-0 triple file")->required();
    duo->add_option("--mode", mode_str, "revealed|oblivious")
        ->check(CLI::IsMember({"revealed", "oblivious"}));
    duo->add_option("--listen", listen_port, "peer port for party 1")->required();
    duo->add_option("--party1", party1_client, "party 1 client host:port")->required();
    duo->add_option("--samples", samples, "sample count");

    auto* sim = app.add_subcommand("simulate", "all three roles in-process");
    std::size_t demo_k = 2;
    sim->add_option("--seed", seed, "rng seed")->required();
    sim->add_option("--pool", pool_path, "pool manifest (demo pool if omitted)");
    sim->add_option("--router", router_path, "router manifest");
    sim->add_option("--demo-k", demo_k, "demo pool size")->check(CLI::Range(2, 5));
    sim->add_option("--mode", mode_str, "revealed|oblivious")
        ->check(CLI::IsMember({"revealed", "oblivious"}));
    sim->add_option("--samples", samples, "sample count");
    sim->add_option("--report", report_dir, "report directory");

    auto* bench = app.add_subcommand("bench", "profile the routed pipeline");
    bench->add_option("--seed", seed, "rng seed")->required();
    bench->add_option("--pool", pool_path, "pool manifest")->required();
    bench->add_option("--router", router_path, "router manifest")->required();
    bench->add_option("--mode", mode_str, "revealed|oblivious")
        ->check(CLI::IsMember({"revealed", "oblivious"}));
    bench->add_option("--samples", samples, "sample count");
    bench->add_option("--report", report_dir, "report directory");

    auto* exp = app.add_subcommand("experiment", "appendix-style harnesses");
    exp->require_subcommand(1);
    auto* exp_scal = exp->add_subcommand("scalability", "pool size sweep");
    exp_scal->add_option("--seed", seed, "rng seed")->required();
    exp_scal->add_option("--config", config_path, "training spec JSON");
    exp_scal->add_option("--report", report_dir, "report directory")->required();
    auto* exp_cost = exp->add_subcommand("cost-sensitivity", "cost profile sweep");
    exp_cost->add_option("--seed", seed, "rng seed")->required();
    exp_cost->add_option("--config", config_path, "training spec JSON");
    exp_cost->add_option("--report", report_dir, "report directory")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        // usage errors exit 1, with help text
        app.exit(e);
        return 1;
    }

    try {
        if (*dealer)
            return cmd_dealer(seed, n_arith, n_bool, pool_path, router_path,
                              mode_str, samples, out_dir, basename);
        if (*train_cmd) return cmd_train(seed, config_path, out_dir);
        if (*share) return cmd_share_pool(seed, pool_path, router_path, out_dir);
        if (*party) {
            if (party_id == 0 && listen_port == 0) {
                std::cerr << "party 0 requires --listen\n" << party->help();
                return 1;
            }
            if (party_id == 1 && connect_addr.empty()) {
                std::cerr << "party 1 requires --connect\n" << party->help();
                return 1;
            }
            return cmd_party(party_id, pool_path, router_path, triples_path,
                             mode_str, listen_port, connect_addr, client_port);
        }
        if (*client)
            return cmd_client(seed, p0_addr, p1_addr, pool_path, mode_str, samples,
                              report_dir);
        if (*duo)
            return cmd_duo(seed, pool_path, router_path, triples_path, mode_str,
                           listen_port, party1_client, samples);
        if (*sim)
            return cmd_simulate(seed, pool_path, router_path, demo_k, mode_str,
                                samples, report_dir);
        if (*bench)
            return cmd_bench(seed, pool_path, router_path, mode_str, samples,
                             report_dir);
        if (*exp)
            return cmd_experiment(*exp_scal ? "scalability" : "cost-sensitivity",
                                  seed, config_path, report_dir);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 0;
}
