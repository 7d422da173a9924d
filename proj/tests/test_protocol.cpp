#include <doctest.h>

#include <thread>

#include "mpcroute/errors.hpp"
#include "mpcroute/protocol.hpp"
#include "support/oracles.hpp"

using namespace mpcroute;

namespace {

std::vector<std::vector<double>> random_samples(std::size_t n, std::size_t dim,
                                                u64 seed) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> dist(-2.0, 2.0);
    std::vector<std::vector<double>> xs(n, std::vector<double>(dim));
    for (auto& x : xs)
        for (auto& v : x) v = dist(rng);
    return xs;
}

} // namespace

TEST_CASE("client_prepare round trips through the codec") {
    const FixedPointCodec codec{Ring{}, 16};
    std::mt19937_64 rng(1);
    SUBCASE("values reconstruct within one codec step") {
        const std::vector<double> e = {0.5, -1.25, 3.75, 0.0, 2.0, -0.125};
        auto [s0, s1] = client_prepare(e, 2, 3, 16, rng);
        CHECK(s0.shape == std::vector<std::size_t>{2, 3});
        const auto vals = reconstruct_tensor(s0, s1);
        for (std::size_t i = 0; i < e.size(); i++)
            CHECK(std::abs(codec.decode(vals[i]) - e[i]) <= std::ldexp(1.0, -16));
    }
    SUBCASE("zero embedding gives zero reconstruction") {
        const std::vector<double> e(4, 0.0);
        auto [s0, s1] = client_prepare(e, 1, 4, 16, rng);
        for (u64 v : reconstruct_tensor(s0, s1)) CHECK(v == 0);
    }
    SUBCASE("different seeds, different shares, same value") {
        const std::vector<double> e = {1.0, -1.0};
        std::mt19937_64 ra(5), rb(6);
        auto [a0, a1] = client_prepare(e, 1, 2, 16, ra);
        auto [b0, b1] = client_prepare(e, 1, 2, 16, rb);
        CHECK(a0.data != b0.data);
        CHECK(reconstruct_tensor(a0, a1) == reconstruct_tensor(b0, b1));
    }
    SUBCASE("range violations surface") {
        const std::vector<double> e = {std::ldexp(1.0, 50)};
        CHECK_THROWS_AS((void)client_prepare(e, 1, 1, 16, rng), RangeError);
    }
}

TEST_CASE("client_finish labels and tie-breaks") {
    const FixedPointCodec codec{Ring{}, 16};
    std::mt19937_64 rng(2);
    SUBCASE("clear winner") {
        const std::vector<u64> logits = {codec.encode(0.1), codec.encode(0.9)};
        auto [y0, y1] = share_tensor(logits, {2}, 16, rng);
        const ClientResult r = client_finish(y0, y1, 16);
        CHECK(r.label == 1);
        CHECK(r.logits[1] == doctest::Approx(0.9));
    }
    SUBCASE("ties break to the lowest index") {
        const std::vector<u64> logits = {codec.encode(0.5), codec.encode(0.5),
                                         codec.encode(0.1)};
        auto [y0, y1] = share_tensor(logits, {3}, 16, rng);
        CHECK(client_finish(y0, y1, 16).label == 0);
    }
}

TEST_CASE("degenerate pool: constant-zero expert, router pinned to it") {
    // expert 0 has all-zero weights and a fixed bias; the router's output
    // layer is constant with logit 0 strictly largest
    const std::size_t d = 4, classes = 2;
    std::vector<ExpertSpec> specs = {{"zero", d, {4}, classes, 1.0},
                                     {"other", d, {4}, classes, 2.0}};
    std::vector<std::vector<double>> params(2);
    params[0].assign(specs[0].param_count(), 0.0);
    params[0][specs[0].param_count() - 2] = 0.75;  // bias class 0
    params[0][specs[0].param_count() - 1] = -0.5;  // bias class 1
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> dist(-0.5, 0.5);
    params[1].resize(specs[1].param_count());
    for (auto& v : params[1]) v = dist(rng);
    const ModelPool pool = build_pool(1, d, classes, 16, specs, params);

    std::vector<double> rw(mlp_param_count(std::vector<std::size_t>{d, 4, 2}), 0.0);
    rw[rw.size() - 2] = 1.0; // output bias -> logits [1, 0]
    const RouterPolicy router = build_router(d, 4, 2, 16, rw);

    const auto xs = random_samples(3, d, 4);
    const SimulateReport rep = simulate(pool, router, xs, ExecMode::Revealed, 50);
    for (std::size_t s : rep.selections) CHECK(s == 0);
    for (const auto& logits : rep.logits) {
        CHECK(std::abs(logits[0] - 0.75) <= 2 * std::ldexp(1.0, -16));
        CHECK(std::abs(logits[1] + 0.5) <= 2 * std::ldexp(1.0, -16));
    }
}

TEST_CASE("revealed and oblivious modes agree on a homogeneous pool") {
    const std::size_t d = 4;
    std::vector<ExpertSpec> specs = {{"a", d, {8}, 2, 1.0}, {"b", d, {8}, 2, 2.0}};
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> dist(-0.7, 0.7);
    std::vector<std::vector<double>> params(2);
    for (std::size_t e = 0; e < 2; e++) {
        params[e].resize(specs[e].param_count());
        for (auto& v : params[e]) v = dist(rng);
    }
    const ModelPool pool = build_pool(1, d, 2, 16, specs, params);
    std::vector<double> rw(mlp_param_count(std::vector<std::size_t>{d, 4, 2}));
    for (auto& v : rw) v = dist(rng);
    const RouterPolicy router = build_router(d, 4, 2, 16, rw);

    const auto xs = random_samples(8, d, 6);
    const SimulateReport a = simulate(pool, router, xs, ExecMode::Revealed, 60);
    const SimulateReport b = simulate(pool, router, xs, ExecMode::Oblivious, 60);
    REQUIRE(a.labels.size() == b.labels.size());
    // share-local truncation noise differs between retrieval paths, so the
    // logits agree within a few codec steps rather than bit-exactly
    const double tol = 16 * std::ldexp(1.0, -16);
    for (std::size_t i = 0; i < a.logits.size(); i++)
        for (std::size_t c = 0; c < a.logits[i].size(); c++)
            CHECK(std::abs(a.logits[i][c] - b.logits[i][c]) <= tol);
    CHECK(a.labels == b.labels);
    // oblivious mode must not reveal selections
    CHECK(b.selections.empty());
}

TEST_CASE("simulation against the independent plaintext oracle") {
    auto [pool, router] = make_demo_artifacts(3, 77);
    const auto xs = random_samples(30, pool.embed_dim, 7);
    const SimulateReport rep = simulate(pool, router, xs, ExecMode::Revealed, 70);
    const FixedPointCodec codec{Ring{}, pool.frac_bits};
    std::size_t agree = 0;
    for (std::size_t i = 0; i < xs.size(); i++) {
        std::vector<u64> enc(xs[i].size());
        for (std::size_t j = 0; j < enc.size(); j++) enc[j] = codec.encode(xs[i][j]);
        const auto oracle = test::oracle_routed_forward(pool, router, enc);
        if (oracle.label == rep.labels[i]) agree++;
        CHECK(oracle.selected == rep.selections[i]);
    }
    CHECK(agree == xs.size());
}

TEST_CASE("mean-pool summary path (seq_len > 1) matches the oracle") {
    const std::size_t d = 4, seq = 3;
    std::vector<ExpertSpec> specs = {{"a", seq * d, {6}, 2, 1.0},
                                     {"b", seq * d, {10}, 2, 3.0}};
    std::mt19937_64 rng(8);
    std::uniform_real_distribution<double> dist(-0.6, 0.6);
    std::vector<std::vector<double>> params(2);
    for (std::size_t e = 0; e < 2; e++) {
        params[e].resize(specs[e].param_count());
        for (auto& v : params[e]) v = dist(rng);
    }
    const ModelPool pool = build_pool(seq, d, 2, 16, specs, params);
    std::vector<double> rw(mlp_param_count(std::vector<std::size_t>{d, 5, 2}));
    for (auto& v : rw) v = dist(rng);
    const RouterPolicy router = build_router(d, 5, 2, 16, rw);

    const auto xs = random_samples(10, seq * d, 9);
    const SimulateReport rep = simulate(pool, router, xs, ExecMode::Revealed, 80);
    const FixedPointCodec codec{Ring{}, 16};
    for (std::size_t i = 0; i < xs.size(); i++) {
        std::vector<u64> enc(xs[i].size());
        for (std::size_t j = 0; j < enc.size(); j++) enc[j] = codec.encode(xs[i][j]);
        const auto oracle = test::oracle_routed_forward(pool, router, enc);
        CHECK(oracle.selected == rep.selections[i]);
        CHECK(oracle.label == rep.labels[i]);
    }
}

TEST_CASE("phase accounting and counter symmetry") {
    auto [pool, router] = make_demo_artifacts(2, 90);
    const auto xs = random_samples(4, pool.embed_dim, 10);
    const SimulateReport rep = simulate(pool, router, xs, ExecMode::Revealed, 91);

    CHECK(rep.party0.phase_sum() == rep.party0.total);
    CHECK(rep.party1.phase_sum() == rep.party1.total);
    CHECK(rep.party0.total.rounds == rep.party1.total.rounds);
    for (const char* phase : {"io", "router", "argmax", "retrieval", "expert"})
        CHECK(rep.party0.phases.count(phase) == 1);
    CHECK(rep.arith0 == rep.arith1);
    CHECK(rep.bool0 == rep.bool1);
}

TEST_CASE("transcript determinism across runs") {
    auto [pool, router] = make_demo_artifacts(2, 92);
    const auto xs = random_samples(3, pool.embed_dim, 11);
    const SimulateReport a = simulate(pool, router, xs, ExecMode::Revealed, 93);
    const SimulateReport b = simulate(pool, router, xs, ExecMode::Revealed, 93);
    CHECK(a.transcript01 == b.transcript01);
    CHECK(a.transcript10 == b.transcript10);
    CHECK(a.transcript_c0 == b.transcript_c0);
    CHECK(a.labels == b.labels);
    CHECK(a.party0.total == b.party0.total);

    const SimulateReport c = simulate(pool, router, xs, ExecMode::Revealed, 94);
    CHECK(a.transcript01 != c.transcript01); // different seed, different masks
}

TEST_CASE("handshake rejects mode skew") {
    auto [pool, router] = make_demo_artifacts(2, 95);
    std::mt19937_64 rng(96);
    auto [a0, a1] = secret_share_pool(pool, router, rng);

    auto [c01, c10] = InProcChannel::make_pair();
    auto [cc0, c0c] = InProcChannel::make_pair();
    auto [cc1, c1c] = InProcChannel::make_pair();
    Transport t01(std::move(c01), true), t10(std::move(c10), false);
    Transport tp0c(std::move(c0c), true), tp1c(std::move(c1c), true);
    SeededTripleSource s0(1, 0), s1(1, 1);

    bool p0_threw = false, p1_threw = false;
    std::thread th0([&] {
        try {
            (void)run_party(a0, ExecMode::Revealed, t01, tp0c, s0);
        } catch (const ProtocolError&) {
            p0_threw = true;
            t01.close();
            tp0c.close();
        }
    });
    std::thread th1([&] {
        try {
            (void)run_party(a1, ExecMode::Oblivious, t10, tp1c, s1);
        } catch (const ProtocolError&) {
            p1_threw = true;
            t10.close();
            tp1c.close();
        }
    });
    th0.join();
    th1.join();
    CHECK(p0_threw);
    CHECK(p1_threw);
    cc0->close();
    cc1->close();
}

TEST_CASE("triple budget estimate covers a real run") {
    auto [pool, router] = make_demo_artifacts(3, 97);
    const auto xs = random_samples(5, pool.embed_dim, 12);
    for (ExecMode mode : {ExecMode::Revealed, ExecMode::Oblivious}) {
        const TripleBudget per = estimate_inference_budget(pool, router, mode);
        const SimulateReport rep = simulate(pool, router, xs, mode, 98);
        CHECK(rep.arith0 <= per.arith * xs.size());
        CHECK(rep.bool0 <= per.boolean * xs.size());
        // the bound is tight once every sample routes to the largest expert
        CHECK(rep.arith0 * 2 >= per.arith * xs.size());
    }
}
