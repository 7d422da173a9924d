#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>

#include "mpcroute/errors.hpp"
#include "mpcroute/trainer.hpp"

using namespace mpcroute;

TEST_CASE("gumbel_softmax") {
    SUBCASE("equal logits, no noise: uniform") {
        const std::vector<double> logits(4, 0.7);
        const auto g = gumbel_softmax(logits, 1.0, nullptr);
        for (double v : g) CHECK(v == doctest::Approx(0.25).epsilon(1e-12));
    }
    SUBCASE("low temperature sharpens toward the max") {
        const std::vector<double> logits = {1.0, 3.0, 2.0};
        const auto g = gumbel_softmax(logits, 0.1, nullptr);
        // direct softmax evaluation of [10, 30, 20]
        const double z = std::exp(10.0 - 30.0) + 1.0 + std::exp(20.0 - 30.0);
        CHECK(g[1] == doctest::Approx(1.0 / z).epsilon(1e-9));
        CHECK(g[0] == doctest::Approx(std::exp(-20.0) / z).epsilon(1e-6));
        CHECK(g[2] == doctest::Approx(std::exp(-10.0) / z).epsilon(1e-6));
        CHECK(g[1] > 0.9999);
    }
    SUBCASE("sampled outputs stay on the simplex") {
        std::mt19937_64 rng(1);
        const std::vector<double> logits = {0.3, -1.2, 2.0, 0.0};
        for (int t = 0; t < 10000; t++) {
            const auto g = gumbel_softmax(logits, 0.7, &rng);
            double sum = 0;
            for (double v : g) {
                if (!(v > 0)) FAIL("non-positive probability");
                sum += v;
            }
            if (std::abs(sum - 1.0) > 1e-12) FAIL("not normalized");
        }
    }
    SUBCASE("tau must be positive") {
        const std::vector<double> logits = {1.0, 2.0};
        CHECK_THROWS_AS((void)gumbel_softmax(logits, 0.0, nullptr),
                        std::domain_error);
        CHECK_THROWS_AS((void)gumbel_softmax(logits, -1.0, nullptr),
                        std::domain_error);
    }
    SUBCASE("deterministic given the seed") {
        const std::vector<double> logits = {0.5, 1.5, -0.5};
        std::mt19937_64 a(42), b(42);
        CHECK(gumbel_softmax(logits, 1.0, &a) == gumbel_softmax(logits, 1.0, &b));
    }
}

TEST_CASE("weighted_prediction") {
    const std::vector<std::vector<double>> outs = {{1, 0}, {0, 1}};
    SUBCASE("one-hot weights select one expert") {
        CHECK(weighted_prediction(std::vector<double>{1, 0}, outs) ==
              std::vector<double>{1, 0});
    }
    SUBCASE("direct evaluation") {
        const auto y = weighted_prediction(std::vector<double>{0.2, 0.8}, outs);
        CHECK(y[0] == doctest::Approx(0.2));
        CHECK(y[1] == doctest::Approx(0.8));
    }
    SUBCASE("identical experts are weight-invariant") {
        const std::vector<std::vector<double>> same = {{0.4, 0.6}, {0.4, 0.6}};
        const auto y = weighted_prediction(std::vector<double>{0.3, 0.7}, same);
        CHECK(y[0] == doctest::Approx(0.4));
        CHECK(y[1] == doctest::Approx(0.6));
    }
    SUBCASE("length mismatch") {
        CHECK_THROWS_AS(
            (void)weighted_prediction(std::vector<double>{1.0}, outs),
            std::invalid_argument);
    }
}

TEST_CASE("task_loss") {
    SUBCASE("uniform two-class logits give ln 2") {
        CHECK(task_loss(std::vector<double>{0, 0}, 0) ==
              doctest::Approx(std::log(2.0)).epsilon(1e-12));
    }
    SUBCASE("confident correct prediction is near zero") {
        CHECK(task_loss(std::vector<double>{20, -20}, 0) <= 1e-8);
    }
    SUBCASE("class permutation symmetry") {
        const double a = task_loss(std::vector<double>{0.3, -1.0, 0.9}, 2);
        const double b = task_loss(std::vector<double>{0.9, -1.0, 0.3}, 0);
        CHECK(a == doctest::Approx(b).epsilon(1e-12));
    }
    SUBCASE("label range") {
        CHECK_THROWS_AS((void)task_loss(std::vector<double>{0, 0}, 2),
                        std::invalid_argument);
    }
}

TEST_CASE("balance_loss") {
    SUBCASE("uniform loads give zero") {
        CHECK(balance_loss_from_loads(std::vector<double>{1, 1, 1}) == 0.0);
    }
    SUBCASE("fully collapsed loads give k - 1") {
        // loads [2,0,0]: Var = 8/9, Mean^2 = 4/9
        CHECK(balance_loss_from_loads(std::vector<double>{2, 0, 0}) ==
              doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("scale invariance") {
        const std::vector<double> loads = {0.5, 1.5, 3.0};
        const double base = balance_loss_from_loads(loads);
        std::vector<double> scaled = loads;
        for (auto& v : scaled) v *= 7.3;
        CHECK(balance_loss_from_loads(scaled) ==
              doctest::Approx(base).epsilon(1e-12));
    }
    SUBCASE("zero loads guarded") {
        CHECK_THROWS_AS((void)balance_loss_from_loads(std::vector<double>{0, 0}),
                        std::domain_error);
    }
}

TEST_CASE("cost_loss") {
    const std::vector<double> c = {2, 7, 13};
    SUBCASE("direct evaluation with the 3-expert cost ladder") {
        const std::vector<std::vector<double>> g = {{0.5, 0.3, 0.2}};
        CHECK(cost_loss(g, c) == doctest::Approx(5.7).epsilon(1e-12));
    }
    SUBCASE("one-hot at the cheapest expert") {
        const std::vector<std::vector<double>> g = {{1, 0, 0}};
        CHECK(cost_loss(g, c) == doctest::Approx(2.0).epsilon(1e-12));
    }
    SUBCASE("uniform routing gives the mean cost") {
        const std::vector<std::vector<double>> g = {
            {1.0 / 3, 1.0 / 3, 1.0 / 3}};
        CHECK(cost_loss(g, c) == doctest::Approx(22.0 / 3).epsilon(1e-12));
    }
}

TEST_CASE("composite_loss") {
    TrainConfig cfg;
    SUBCASE("degenerate weights reduce to the task loss") {
        cfg.alpha = 0;
        cfg.beta = 0;
        CHECK(composite_loss(1.7, 9.0, 4.0, cfg) == 1.7);
    }
    SUBCASE("stated mapping: alpha prices cost, beta prices balance") {
        cfg.alpha = 0.05;
        cfg.beta = 0.08;
        CHECK(composite_loss(1.0, 2.0, 5.7, cfg) ==
              doctest::Approx(1.445).epsilon(1e-12));
    }
    SUBCASE("monotone in the cost term") {
        cfg.alpha = 0.05;
        cfg.beta = 0.08;
        CHECK(composite_loss(1.0, 2.0, 6.0, cfg) >=
              composite_loss(1.0, 2.0, 5.7, cfg));
    }
}

namespace {

struct Toy {
    Dataset data;
    Mlp router;
    std::vector<Mlp> experts;
    std::vector<double> costs;
};

Toy make_toy(u64 seed, std::size_t n = 16) {
    Toy t;
    DatasetConfig dc;
    dc.n = n;
    dc.embed_dim = 4;
    dc.seed = seed;
    t.data = make_synthetic_dataset(dc);
    std::mt19937_64 rng(seed + 1);
    t.router = Mlp::init({4, 5, 2}, rng);
    t.experts.push_back(Mlp::init({4, 3, 2}, rng));
    t.experts.push_back(Mlp::init({4, 6, 2}, rng));
    t.costs = {1.0, 4.0};
    return t;
}

std::vector<std::size_t> all_indices(const Dataset& d) {
    std::vector<std::size_t> idx(d.size());
    std::iota(idx.begin(), idx.end(), 0);
    return idx;
}

} // namespace

TEST_CASE("zero learning rate leaves parameters unchanged") {
    Toy t = make_toy(5);
    const auto before_r = t.router.flat();
    const auto before_e = t.experts[1].flat();
    TrainConfig cfg;
    cfg.lr = 0.0;
    const auto idx = all_indices(t.data);
    std::mt19937_64 rng(9);
    (void)train_step({&t.data, idx}, t.router, t.experts, t.costs, cfg, 1.0, rng);
    CHECK(t.router.flat() == before_r);
    CHECK(t.experts[1].flat() == before_e);
}

TEST_CASE("analytic gradients match central finite differences") {
    Toy t = make_toy(6);
    const auto idx = all_indices(t.data);
    const BatchView batch{&t.data, idx};
    const double alpha = 0.05, beta = 0.08, tau = 0.8;

    // frozen gumbel noise
    std::mt19937_64 nrng(3);
    std::vector<std::vector<double>> noise(t.data.size(),
                                           std::vector<double>(2, 0.0));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (auto& row : noise)
        for (auto& v : row) v = -std::log(-std::log(unit(nrng)));

    MlpGrads rg = MlpGrads::zeros_like(t.router);
    std::vector<MlpGrads> eg = {MlpGrads::zeros_like(t.experts[0]),
                                MlpGrads::zeros_like(t.experts[1])};
    (void)joint_forward_backward(batch, t.router, t.experts, t.costs, alpha, beta,
                                 tau, noise, &rg, &eg);

    auto loss_at = [&]() {
        return joint_forward_backward(batch, t.router, t.experts, t.costs, alpha,
                                      beta, tau, noise, nullptr, nullptr)
            .composite;
    };

    const double h = 1e-5;
    double max_rel = 0;
    auto check_group = [&](std::vector<double>& params,
                           const std::vector<double>& grads) {
        for (std::size_t i = 0; i < params.size(); i++) {
            const double saved = params[i];
            params[i] = saved + h;
            const double up = loss_at();
            params[i] = saved - h;
            const double down = loss_at();
            params[i] = saved;
            const double fd = (up - down) / (2 * h);
            const double rel = std::abs(fd - grads[i]) /
                               std::max({std::abs(fd), std::abs(grads[i]), 1e-6});
            max_rel = std::max(max_rel, rel);
        }
    };
    for (std::size_t l = 0; l < t.router.W.size(); l++) {
        check_group(t.router.W[l], rg.W[l]);
        check_group(t.router.b[l], rg.b[l]);
    }
    for (std::size_t e = 0; e < t.experts.size(); e++)
        for (std::size_t l = 0; l < t.experts[e].W.size(); l++) {
            check_group(t.experts[e].W[l], eg[e].W[l]);
            check_group(t.experts[e].b[l], eg[e].b[l]);
        }
    CHECK(max_rel <= 1e-4);
}

TEST_CASE("Eq.-style consistency: one-hot routing equals the selected expert") {
    // with hard one-hot g the mixed prediction must equal that expert's output
    const std::vector<std::vector<double>> outs = {{0.3, -0.7}, {1.1, 0.2}};
    const auto y = weighted_prediction(std::vector<double>{0, 1}, outs);
    CHECK(y == outs[1]);
}

TEST_CASE("training learns a separable toy task") {
    DatasetConfig dc;
    dc.n = 64;
    dc.embed_dim = 4;
    dc.easy_frac = 1.0; // fully linearly separable
    dc.seed = 17;
    const Dataset data = make_synthetic_dataset(dc);
    std::mt19937_64 rng(18);
    Mlp router = Mlp::init({4, 4, 2}, rng);
    std::vector<Mlp> experts = {Mlp::init({4, 4, 2}, rng),
                                Mlp::init({4, 8, 2}, rng)};
    const std::vector<double> costs = {1, 2};
    TrainConfig cfg;
    cfg.alpha = 0;
    cfg.beta = 0;
    cfg.lr = 0.2;
    cfg.batch = 16;
    const auto idx = all_indices(data);
    std::mt19937_64 step_rng(19);
    for (int step = 0; step < 200; step++) {
        const std::size_t start = (step * 16) % data.size();
        std::vector<std::size_t> b(idx.begin() + start, idx.begin() + start + 16);
        (void)train_step({&data, b}, router, experts, costs, cfg, 1.0, step_rng);
    }
    const EvalResult ev = evaluate_routed(router, experts, data);
    CHECK(ev.accuracy >= 0.95);
}

TEST_CASE("full training loop") {
    DatasetConfig dc;
    dc.n = 200;
    dc.embed_dim = 5;
    dc.seed = 21;
    const Dataset data = make_synthetic_dataset(dc);
    std::vector<ExpertSpec> specs = {{"tiny", 0, {4}, 0, 2.0},
                                     {"large", 0, {16}, 0, 13.0}};
    TrainConfig cfg;
    cfg.epochs = 6;
    cfg.warmup_epochs = 2;
    cfg.seed = 22;

    SUBCASE("deterministic history for a fixed seed") {
        const TrainOutput a = train(data, specs, 6, cfg);
        const TrainOutput b = train(data, specs, 6, cfg);
        REQUIRE(a.history.size() == b.history.size());
        for (std::size_t e = 0; e < a.history.size(); e++) {
            CHECK(a.history[e].l_task == b.history[e].l_task);
            CHECK(a.history[e].l_balance == b.history[e].l_balance);
            CHECK(a.history[e].l_cost == b.history[e].l_cost);
            CHECK(a.history[e].hist == b.history[e].hist);
        }
        CHECK(a.pool_q.blobs == b.pool_q.blobs);
        CHECK(a.router_q.blob == b.router_q.blob);
    }

    SUBCASE("history csv has the fixed header") {
        const TrainOutput out = train(data, specs, 6, cfg);
        const auto path = std::filesystem::temp_directory_path() / "hist.csv";
        write_history_csv(out.history, path);
        std::ifstream f(path);
        std::string header;
        std::getline(f, header);
        CHECK(header == "epoch,L_task,L_balance,L_cost,hist_1,hist_2");
    }

    SUBCASE("cost pressure shifts routing toward the cheap expert") {
        TrainConfig cheap = cfg;
        cheap.alpha = 0.0;
        TrainConfig costly = cfg;
        costly.alpha = 0.5;
        const TrainOutput a = train(data, specs, 6, cheap);
        const TrainOutput b = train(data, specs, 6, costly);
        const auto ha = selection_histogram(a.router, data);
        const auto hb = selection_histogram(b.router, data);
        const double cost_a = ha[0] * 2.0 + ha[1] * 13.0;
        const double cost_b = hb[0] * 2.0 + hb[1] * 13.0;
        CHECK(cost_b < cost_a);
    }

    SUBCASE("balance pressure lowers the selection CV^2") {
        // needs the capacity-tiered pool and a real training budget
        DatasetConfig bdc;
        bdc.n = 400;
        bdc.easy_frac = 0.5;
        bdc.seed = 31;
        const Dataset bdata = make_synthetic_dataset(bdc);
        std::vector<ExpertSpec> tiers = {{"tiny", 0, {}, 0, 2.0},
                                         {"base", 0, {1}, 0, 7.0},
                                         {"large", 0, {24}, 0, 13.0}};
        TrainConfig on; // defaults: alpha 0.05, beta 0.08
        on.seed = 32;
        TrainConfig off = on;
        off.beta = 0.0;
        const TrainOutput a = train(bdata, tiers, 16, off);
        const TrainOutput b = train(bdata, tiers, 16, on);
        const auto ha = selection_histogram(a.router, bdata);
        const auto hb = selection_histogram(b.router, bdata);
        CHECK(balance_loss_from_loads(hb) < balance_loss_from_loads(ha));
    }
}

TEST_CASE("non-finite loss raises a training error") {
    Toy t = make_toy(7);
    // blow up a weight so the forward overflows
    t.router.W[0][0] = 1e308;
    t.router.W[0][1] = 1e308;
    TrainConfig cfg;
    const auto idx = all_indices(t.data);
    std::mt19937_64 rng(8);
    CHECK_THROWS_AS((void)train_step({&t.data, idx}, t.router, t.experts, t.costs,
                                     cfg, 1.0, rng),
                    TrainingError);
}

TEST_CASE("train spec json round trip") {
    const TrainSpec spec = default_train_spec();
    const auto path = std::filesystem::temp_directory_path() / "spec.json";
    save_train_spec(spec, path);
    const TrainSpec back = load_train_spec(path);
    CHECK(back.train.alpha == spec.train.alpha);
    CHECK(back.train.beta == spec.train.beta);
    CHECK(back.dataset.n == spec.dataset.n);
    CHECK(back.experts.size() == spec.experts.size());
    CHECK(back.experts[2].cost == 13.0);
}
