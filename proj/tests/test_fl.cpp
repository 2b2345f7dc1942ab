#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>

#include "distreal/experiment.hpp"
#include "distreal/fl.hpp"
#include "distreal/mac_model.hpp"
#include "distreal/resource_sim.hpp"

using namespace distreal;

namespace {

RoundUpdate make_update(int id, double c, std::vector<double> delta, bool straggler = false) {
    RoundUpdate u;
    u.device = id;
    u.c = c;
    u.delta = std::move(delta);
    u.straggler = straggler;
    return u;
}

NetworkSpec desk() { return desk_network(8, 12); }

ExperimentConfig micro_config() {
    ExperimentConfig cfg;
    cfg.dataset.classes = 8;
    cfg.dataset.samples_per_class = 32;  // 256 total
    cfg.dataset.image_size = 12;
    cfg.dataset.difficulty = 0.4;
    cfg.devices = 6;
    cfg.per_round = 2;
    cfg.rounds = 3;
    cfg.samples_per_device = 8;
    cfg.batch_size = 4;
    cfg.eval_samples = 64;
    cfg.dse.validation_samples = 64;
    cfg.dse.short_train_batch_size = 8;
    cfg.seeds = {1};
    return cfg;
}

ParetoLUT dense_only_lut(const NetworkSpec& net) {
    ParetoLUT lut;
    lut.fingerprint = net.fingerprint();
    const std::size_t k = static_cast<std::size_t>(net.conv_count());
    lut.entries = {{DropoutVector(k, 0.0), network_expected_macs(net, DropoutVector(k, 0.0)).total}};
    return lut;
}

}  // namespace

TEST_CASE("server round implements MAC-weighted averaging") {
    SUBCASE("worked example") {
        auto next = server_round({0.0}, {make_update(0, 1, {2.0}), make_update(1, 3, {6.0})});
        CHECK(next[0] == doctest::Approx(5.0));
    }
    SUBCASE("equal weights reduce to the plain average") {
        auto next = server_round({1.0}, {make_update(0, 7, {2.0}), make_update(1, 7, {4.0})});
        CHECK(next[0] == doctest::Approx(1.0 + 3.0));
    }
    SUBCASE("stragglers are excluded from both sums") {
        auto next = server_round({0.0}, {make_update(0, 1, {2.0}),
                                         make_update(1, 100, {100.0}, true)});
        CHECK(next[0] == doctest::Approx(2.0));
    }
    SUBCASE("an all-straggler round leaves the model unchanged") {
        auto next = server_round({3.5}, {make_update(0, 1, {2.0}, true)});
        CHECK(next[0] == 3.5);
    }
    SUBCASE("zero total weight with live updates is an error") {
        CHECK_THROWS_AS(server_round({0.0}, {make_update(0, 0, {1.0})}), std::logic_error);
    }
    SUBCASE("aggregation is invariant under input order") {
        std::vector<RoundUpdate> a = {make_update(0, 1, {0.3}), make_update(1, 2, {0.7}),
                                      make_update(2, 5, {0.1})};
        std::vector<RoundUpdate> b = {a[2], a[0], a[1]};
        CHECK(server_round({0.0}, a) == server_round({0.0}, b));
    }
}

TEST_CASE("heterofl prefix masks") {
    NetworkSpec s;
    s.input_dims = {1, 20, 20};
    s.layers = {Layer::SparseBegin(), Layer::Conv(100, 3, 3), Layer::SparseEnd()};
    s.validate();

    MaskSet p1 = heterofl_prefix_masks(s, 0.7, 1);
    CHECK(p1.conv_masks[0].kept.size() == 100);
    MaskSet p3 = heterofl_prefix_masks(s, 0.7, 3);
    CHECK(p3.conv_masks[0].kept.size() == 49);  // ceil(0.49 * 100)
    CHECK(p3.conv_masks[0].kept.front() == 0);
    CHECK(p3.conv_masks[0].kept.back() == 48);
}

TEST_CASE("uniform rate grid fit matches a brute-force scan") {
    NetworkSpec net = desk();
    Rng rng(3);
    const std::size_t k = static_cast<std::size_t>(net.conv_count());
    for (int trial = 0; trial < 30; ++trial) {
        const double budget = rng.uniform(1e4, 2e6);
        auto fast = uniform_rate_for_budget(net, budget, 4, 16, 2.0);
        // oracle: scan the same grid
        std::optional<double> expect;
        for (int i = 0; i <= 50; ++i) {
            const double r = i * 0.01;
            const double cost =
                training_macs(network_expected_macs(net, DropoutVector(k, r)).total) * 16 * 4;
            if (cost <= budget * (1 + 1e-12)) {
                expect = r;
                break;
            }
        }
        CHECK(fast.has_value() == expect.has_value());
        if (fast && expect) CHECK(*fast == doctest::Approx(*expect));
    }
}

TEST_CASE("client behaviors on crafted traces") {
    NetworkSpec net = desk();
    Dataset pool = synthesize(8, 16, 12, 0.4, 51);  // 128 samples
    const std::size_t nk = static_cast<std::size_t>(net.conv_count());
    const DropoutVector zeros(nk, 0.0), halves(nk, 0.5);
    const double fwd0 = network_expected_macs(net, zeros).total;
    const double fwd5 = network_expected_macs(net, halves).total;

    ClientConfig cfg;
    cfg.batch_size = 4;
    cfg.lr = 0.05;

    DeviceState dev;
    dev.id = 0;
    dev.data_idx = {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11, 12, 13, 14, 15};  // 4 batches

    Rng wr(7);
    Weights theta = Weights::init(net, wr);

    SUBCASE("saturated budget reduces distreal to plain local SGD") {
        ParetoLUT lut;
        lut.fingerprint = net.fingerprint();
        lut.entries = {{halves, fwd5}, {zeros, fwd0}};

        const double high = training_macs(fwd0) * 4 * 4;  // exact full-round rate
        dev.trace = ResourceTrace{{{0.0, high}}, 0.0, high, high};

        RoundUpdate a = client_train_distreal(net, theta, dev, pool, lut, 0, cfg, 99);
        RoundUpdate b = client_train_fedavg(net, theta, dev, pool, 0, cfg, 99);
        CHECK(a.delta == b.delta);  // bitwise
        CHECK(a.c == doctest::Approx(4 * fwd0));
        CHECK(a.c == b.c);
        CHECK(!a.straggler);
        CHECK(a.budget_fallbacks == 0);
    }

    SUBCASE("mid-round resource drop switches the entry between batches") {
        ParetoLUT lut;
        lut.fingerprint = net.fingerprint();
        lut.entries = {{halves, fwd5}, {zeros, fwd0}};

        const double high = training_macs(fwd0) * 4 * 4;
        ResourceTrace tr;
        tr.low = high / 4;
        tr.high = high;
        tr.events = {{0.0, high}, {0.3, high / 4}};
        dev.trace = tr;

        RoundUpdate u = client_train_distreal(net, theta, dev, pool, lut, 0, cfg, 99);
        // two dense batches, then the drop forces the small entry
        CHECK(u.c == doctest::Approx(2 * fwd0 + 2 * fwd5));
        CHECK(u.budget_fallbacks > 0);  // smallest entry exceeds a quarter budget
        CHECK(!u.straggler);            // never flagged by construction
    }

    SUBCASE("distreal LUT fingerprint is enforced") {
        ParetoLUT lut = dense_only_lut(net);
        lut.fingerprint ^= 1;
        dev.trace = ResourceTrace{{{0.0, 1e9}}, 0.0, 1e9, 1e9};
        CHECK_THROWS_AS(client_train_distreal(net, theta, dev, pool, lut, 0, cfg, 99),
                        std::invalid_argument);
    }

    SUBCASE("federated dropout stays within round time on static resources") {
        // variability 2: even the weakest level fits a uniform rate
        const double high = training_macs(fwd0) * 4 * 4;
        dev.trace = ResourceTrace{{{0.0, high / 2}}, 0.0, high / 2, high};
        RoundUpdate u = client_train_federated_dropout(net, theta, dev, pool, 0, cfg, 99);
        CHECK(!u.straggler);
        CHECK(u.c > 0.0);
    }

    SUBCASE("federated dropout straggles when resources halve mid-round") {
        const double high = training_macs(fwd0) * 4 * 4;
        ResourceTrace tr;
        tr.low = high / 2;
        tr.high = high;
        tr.events = {{0.0, high}, {0.05, high / 2}};  // zero slack, then a drop
        dev.trace = tr;
        RoundUpdate u = client_train_federated_dropout(net, theta, dev, pool, 0, cfg, 99);
        CHECK(u.straggler);
    }

    SUBCASE("heterofl level 1 equals plain local SGD") {
        const double high = training_macs(fwd0) * 4 * 4;
        dev.trace = ResourceTrace{{{0.0, high}}, 0.0, high, high};
        RoundUpdate a = client_train_heterofl(net, theta, dev, pool, 0, cfg, 99);
        RoundUpdate b = client_train_fedavg(net, theta, dev, pool, 0, cfg, 99);
        CHECK(a.delta == b.delta);
        CHECK(!a.straggler);
    }

    SUBCASE("heterofl deltas vanish outside the assigned prefix") {
        const double high = training_macs(fwd0) * 4 * 4;
        dev.trace = ResourceTrace{{{0.0, high / 3}}, 0.0, high / 3, high};
        RoundUpdate u = client_train_heterofl(net, theta, dev, pool, 0, cfg, 99);
        REQUIRE(!u.straggler);

        // find the assigned level from the realized cost
        int level = -1;
        for (int p = 1; p <= cfg.heterofl_levels; ++p) {
            const double cost =
                training_macs(realized_macs(net, heterofl_prefix_masks(net, cfg.heterofl_s, p))) *
                4 * 4;
            if (cost <= high / 3 * (1 + 1e-12)) {
                level = p;
                break;
            }
        }
        REQUIRE(level > 1);
        MaskSet masks = heterofl_prefix_masks(net, cfg.heterofl_s, level);

        // conv1 weights of dropped filters must have exactly zero delta
        const int kept1 = static_cast<int>(masks.conv_masks[0].kept.size());
        REQUIRE(kept1 < 8);
        std::vector<double> init;
        theta.to_flat(init);
        // conv1 weight block starts at offset 0 (layer order), 1*3*3 per filter
        for (int f = kept1; f < 8; ++f)
            for (int i = 0; i < 9; ++i)
                CHECK(u.delta[static_cast<std::size_t>(f * 9 + i)] == 0.0);
        // and some kept-filter delta should be nonzero
        double moved = 0.0;
        for (int i = 0; i < kept1 * 9; ++i) moved += std::fabs(u.delta[static_cast<std::size_t>(i)]);
        CHECK(moved > 0.0);
    }

    SUBCASE("heterofl straggles immediately when no level fits") {
        ClientConfig tight = cfg;
        tight.heterofl_levels = 1;
        const double high = training_macs(fwd0) * 4 * 4;
        dev.trace = ResourceTrace{{{0.0, high / 10}}, 0.0, high / 10, high};
        RoundUpdate u = client_train_heterofl(net, theta, dev, pool, 0, tight, 99);
        CHECK(u.straggler);
        CHECK(u.c == 0.0);
        for (double d : u.delta) CHECK(d == 0.0);
    }
}

TEST_CASE("distreal equals fedavg_full under maximal constant resources") {
    ExperimentConfig cfg = micro_config();
    cfg.variability = 1.0;  // constant, equal, maximal
    cfg.lambda_rate = 0.0;
    Environment env = build_environment(cfg);
    ParetoLUT lut = dense_only_lut(env.net);

    RunResult a = run_experiment(env, cfg, Technique::distreal, 1, &lut);
    RunResult b = run_experiment(env, cfg, Technique::fedavg_full, 1, nullptr);
    REQUIRE(a.rounds.size() == b.rounds.size());
    for (std::size_t i = 0; i < a.rounds.size(); ++i) {
        CHECK(a.rounds[i].theta_hash == b.rounds[i].theta_hash);
        CHECK(a.rounds[i].accuracy == b.rounds[i].accuracy);
    }
    CHECK(a.final_theta == b.final_theta);  // bitwise
    for (const auto& rec : a.rounds) CHECK(rec.stragglers == 0);
}

TEST_CASE("run_experiment is reproducible and technique-complete") {
    ExperimentConfig cfg = micro_config();
    cfg.variability = 4.0;
    cfg.lambda_rate = 2.0;
    Environment env = build_environment(cfg);

    // a real (tiny) search so the LUT has several entries
    ExperimentConfig dse_cfg = cfg;
    dse_cfg.dse.population = 8;
    dse_cfg.dse.generations = 2;
    dse_cfg.dse.short_train_batches = 6;
    dse_cfg.dse.short_train_batch_size = 8;
    dse_cfg.dse.pretrain_steps = 20;
    dse_cfg.dse.pretrain_batch_size = 8;
    dse_cfg.dse.seeds = {5, 6};
    DseArtifacts art = run_dse(env, dse_cfg);
    REQUIRE(art.result.lut.entries.size() >= 2);

    for (Technique t : {Technique::distreal, Technique::federated_dropout,
                        Technique::heterofl, Technique::small_nn}) {
        RunResult r1 = run_experiment(env, cfg, t, 2, &art.result.lut);
        RunResult r2 = run_experiment(env, cfg, t, 2, &art.result.lut);
        REQUIRE(r1.rounds.size() == 3);
        CHECK(r1.final_theta == r2.final_theta);
        for (std::size_t i = 0; i < r1.rounds.size(); ++i)
            CHECK(r1.rounds[i].theta_hash == r2.rounds[i].theta_hash);
        if (t == Technique::distreal)
            for (const auto& rec : r1.rounds) CHECK(rec.stragglers == 0);
    }
}

TEST_CASE("default synthetic task trains past 80% within 200 rounds") {
    // full-resource FedAvg on the shipped defaults; takes ~half a minute
    ExperimentConfig cfg;
    Environment env = build_environment(cfg);
    RunResult r = run_experiment(env, cfg, Technique::fedavg_full, 1, nullptr);
    double best = 0.0;
    for (const auto& rec : r.rounds) best = std::max(best, rec.accuracy);
    CHECK(best > 0.8);
}

TEST_CASE("conservation: reported c equals the sum of selected entry MACs") {
    NetworkSpec net = desk();
    Dataset pool = synthesize(8, 16, 12, 0.4, 51);
    const std::size_t nk = static_cast<std::size_t>(net.conv_count());
    const DropoutVector zeros(nk, 0.0), threes(nk, 0.3);
    const double fwd0 = network_expected_macs(net, zeros).total;
    const double fwd3 = network_expected_macs(net, threes).total;

    ParetoLUT lut;
    lut.fingerprint = net.fingerprint();
    lut.entries = {{threes, fwd3}, {zeros, fwd0}};

    ClientConfig cfg;
    cfg.batch_size = 4;
    DeviceState dev;
    dev.id = 3;
    for (int i = 0; i < 12; ++i) dev.data_idx.push_back(i);  // 3 batches

    // level fits the 0.3 entry but not the dense one
    const double high = training_macs(fwd0) * 4 * 3;
    const double level = training_macs(fwd3) * 4 * 3 * 1.02;
    dev.trace = ResourceTrace{{{0.0, level}}, 0.0, level, high};

    Rng wr(7);
    Weights theta = Weights::init(net, wr);
    RoundUpdate u = client_train_distreal(net, theta, dev, pool, lut, 0, cfg, 42);
    CHECK(u.c == 3 * fwd3);  // exact accumulation contract
}
