#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "distreal/data.hpp"
#include "distreal/dse.hpp"
#include "distreal/engine.hpp"
#include "distreal/mac_model.hpp"

using namespace distreal;

namespace {

using Point = std::pair<double, double>;

// O(n^3) dominance oracle
std::vector<std::vector<int>> brute_force_fronts(const std::vector<Point>& pts) {
    auto dominates = [&pts](int a, int b) {
        return pts[static_cast<std::size_t>(a)].first <= pts[static_cast<std::size_t>(b)].first &&
               pts[static_cast<std::size_t>(a)].second <= pts[static_cast<std::size_t>(b)].second &&
               (pts[static_cast<std::size_t>(a)].first < pts[static_cast<std::size_t>(b)].first ||
                pts[static_cast<std::size_t>(a)].second < pts[static_cast<std::size_t>(b)].second);
    };
    std::vector<std::vector<int>> fronts;
    std::set<int> remaining;
    for (int i = 0; i < static_cast<int>(pts.size()); ++i) remaining.insert(i);
    while (!remaining.empty()) {
        std::vector<int> front;
        for (int a : remaining) {
            bool dominated = false;
            for (int b : remaining)
                if (a != b && dominates(b, a)) dominated = true;
            if (!dominated) front.push_back(a);
        }
        fronts.push_back(front);
        for (int i : front) remaining.erase(i);
    }
    return fronts;
}

// Analytic surrogate: f1 = mean(d)/0.5, f2 = 1 - f1; all points are mutually
// non-dominated on the line f1 + f2 = 1.
FitnessFn surrogate() {
    return [](const DropoutVector& d, double* macs, double* dacc) {
        double mean = 0.0;
        for (double g : d) mean += g;
        mean /= static_cast<double>(d.size());
        const double f1 = mean / 0.5;
        if (macs) *macs = f1;
        if (dacc) *dacc = 1.0 - f1;
        return std::make_pair(f1, 1.0 - f1);
    };
}

DseParams fast_params() {
    DseParams p;
    p.population = 64;
    p.generations = 30;
    return p;
}

}  // namespace

TEST_CASE("non-dominated sorting on a hand-checkable instance") {
    std::vector<Point> pts = {{1, 1}, {1, 2}, {2, 1}, {2, 2}};
    auto fronts = fast_non_dominated_sort(pts);
    REQUIRE(fronts.size() == 3);
    CHECK(fronts[0] == std::vector<int>{0});
    CHECK(fronts[1] == std::vector<int>{1, 2});
    CHECK(fronts[2] == std::vector<int>{3});

    std::vector<Point> same(5, {3.0, 3.0});
    CHECK(fast_non_dominated_sort(same).size() == 1);
}

TEST_CASE("non-dominated sorting matches the brute-force oracle") {
    Rng rng(123);
    for (int instance = 0; instance < 100; ++instance) {
        std::vector<Point> pts(50);
        for (auto& p : pts) p = {rng.uniform(0, 1), rng.uniform(0, 1)};
        auto fast = fast_non_dominated_sort(pts);
        auto brute = brute_force_fronts(pts);
        REQUIRE(fast.size() == brute.size());
        for (std::size_t f = 0; f < fast.size(); ++f) {
            auto a = fast[f], b = brute[f];
            std::sort(a.begin(), a.end());
            std::sort(b.begin(), b.end());
            CHECK(a == b);
        }
    }
}

TEST_CASE("crowding distance") {
    SUBCASE("two points are both boundary") {
        auto d = crowding_distance({{0, 1}, {1, 0}});
        CHECK(std::isinf(d[0]));
        CHECK(std::isinf(d[1]));
    }
    SUBCASE("equidistant collinear middle point gets 2") {
        auto d = crowding_distance({{0, 1}, {0.5, 0.5}, {1, 0}});
        CHECK(std::isinf(d[0]));
        CHECK(d[1] == doctest::Approx(2.0));
        CHECK(std::isinf(d[2]));
    }
    SUBCASE("interior duplicates get zero") {
        auto d = crowding_distance({{0, 1}, {0.4, 0.6}, {0.4, 0.6}, {0.4, 0.6}, {1, 0}});
        CHECK(d[2] == 0.0);
    }
}

TEST_CASE("sbx crossover") {
    Rng rng(5);
    DropoutVector a = {0.1, 0.3, 0.5}, b = {0.1, 0.3, 0.5}, ca, cb;
    sbx_crossover(a, b, 1.0, 10, 0.0, 0.5, rng, ca, cb);
    CHECK(ca == a);  // identical parents -> identical children
    CHECK(cb == b);

    DropoutVector p1 = {0.0, 0.5, 0.2}, p2 = {0.5, 0.0, 0.4};
    for (int i = 0; i < 500; ++i) {
        sbx_crossover(p1, p2, 0.95, 10, 0.0, 0.5, rng, ca, cb);
        for (double g : ca) {
            CHECK(g >= 0.0);
            CHECK(g <= 0.5);
        }
        for (double g : cb) {
            CHECK(g >= 0.0);
            CHECK(g <= 0.5);
        }
    }

    sbx_crossover(p1, p2, 0.0, 10, 0.0, 0.5, rng, ca, cb);
    CHECK(ca == p1);
    CHECK(cb == p2);
}

TEST_CASE("polynomial mutation") {
    Rng rng(6);
    DropoutVector d = {0.1, 0.4};
    DropoutVector copy = d;
    polynomial_mutation(copy, 0.0, 50, 0.0, 0.5, rng);
    CHECK(copy == d);

    int mutated = 0;
    const int trials = 100000;
    for (int i = 0; i < trials / 2; ++i) {
        DropoutVector g = {0.25, 0.25};
        polynomial_mutation(g, 0.01, 50, 0.0, 0.5, rng);
        for (double v : g) {
            CHECK(v >= 0.0);
            CHECK(v <= 0.5);
        }
        mutated += (g[0] != 0.25) + (g[1] != 0.25);
    }
    const double freq = static_cast<double>(mutated) / trials;
    CHECK(freq == doctest::Approx(0.01).epsilon(0.2));
}

TEST_CASE("hypervolume of simple fronts") {
    // single point (0,0) against ref (1.1, 1.1)
    CHECK(hypervolume_2d({{0, 0}}) == doctest::Approx(1.21));
    // staircase {(0,1),(1,0)}: 1.1*0.1 plus the 0.1-wide strip below f2=1
    CHECK(hypervolume_2d({{0, 1}, {1, 0}}) == doctest::Approx(0.11 + 0.1 * 1.0));
    // dominated points do not add volume
    CHECK(hypervolume_2d({{0, 0}, {0.5, 0.5}}) == doctest::Approx(1.21));
}

TEST_CASE("nsga2 on the analytic surrogate") {
    DseParams p = fast_params();
    DseResult res = nsga2_run_custom(4, p, 42, surrogate(), 0x1234);

    SUBCASE("generation 0 contains both endpoint individuals") {
        const auto& gen0 = res.generations[0];
        bool has_zero = false, has_half = false;
        for (const auto& ind : gen0) {
            if (ind.d == DropoutVector(4, 0.0)) has_zero = true;
            if (ind.d == DropoutVector(4, 0.5)) has_half = true;
        }
        CHECK(has_zero);
        CHECK(has_half);
        CHECK(gen0.size() == 64);
    }

    SUBCASE("all genes stay in bounds in every generation") {
        for (const auto& gen : res.generations)
            for (const auto& ind : gen)
                for (double g : ind.d) {
                    CHECK(g >= 0.0);
                    CHECK(g <= 0.5);
                }
    }

    SUBCASE("rank-0 hypervolume never decreases") {
        REQUIRE(res.front_hypervolume.size() == res.generations.size());
        double prev = -1.0;
        for (double hv : res.front_hypervolume) {
            CHECK(hv >= prev);
            prev = hv;
        }
        CHECK(prev > 0.5);  // surrogate front approaches the f1+f2=1 diagonal
    }

    SUBCASE("final front spans the objective range with small gaps") {
        const auto& last = res.generations.back();
        std::vector<double> f1s;
        for (const auto& ind : last) f1s.push_back(ind.f1);
        std::sort(f1s.begin(), f1s.end());
        CHECK(f1s.front() == doctest::Approx(0.0).epsilon(1e-9));
        CHECK(f1s.back() == doctest::Approx(1.0).epsilon(1e-9));
        double max_gap = 0.0;
        for (std::size_t i = 1; i < f1s.size(); ++i)
            max_gap = std::max(max_gap, f1s[i] - f1s[i - 1]);
        CHECK(max_gap < 0.1);
    }

    SUBCASE("deterministic given the master seed") {
        DseResult res2 = nsga2_run_custom(4, p, 42, surrogate(), 0x1234);
        REQUIRE(res2.lut.entries.size() == res.lut.entries.size());
        for (std::size_t i = 0; i < res.lut.entries.size(); ++i) {
            CHECK(res2.lut.entries[i].d == res.lut.entries[i].d);
            CHECK(res2.lut.entries[i].expected_fwd_macs ==
                  res.lut.entries[i].expected_fwd_macs);
        }
        DseResult res3 = nsga2_run_custom(4, p, 43, surrogate(), 0x1234);
        CHECK(res3.lut.entries.size() != res.lut.entries.size());
    }
}

TEST_CASE("pareto lut extraction") {
    std::vector<Individual> pop;
    auto add = [&pop](double macs, double dacc, double f1, double f2) {
        Individual ind;
        ind.d = {f1, f2};
        ind.macs = macs;
        ind.delta_acc = dacc;
        ind.f1 = f1;
        ind.f2 = f2;
        pop.push_back(ind);
    };
    add(100, 0.5, 1.0, 0.0);   // rank 0
    add(10, 0.1, 0.0, 1.0);    // rank 0
    add(50, 0.3, 0.5, 0.5);    // rank 0
    add(50, 0.3, 0.5, 0.5);    // duplicate objectives
    add(60, 0.2, 0.6, 0.8);    // dominated by (0.5, 0.5)

    ParetoLUT lut = extract_pareto_lut(pop, nullptr, 7);
    CHECK(lut.fingerprint == 7);
    REQUIRE(lut.entries.size() == 3);
    CHECK(lut.entries[0].expected_fwd_macs == 10.0);
    CHECK(lut.entries[1].expected_fwd_macs == 50.0);
    CHECK(lut.entries[2].expected_fwd_macs == 100.0);

    // every entry non-dominated w.r.t. every other on (MACs, delta-acc)
    const double daccs[3] = {0.1, 0.3, 0.5};
    for (std::size_t a = 0; a < lut.entries.size(); ++a)
        for (std::size_t b = 0; b < lut.entries.size(); ++b) {
            if (a == b) continue;
            const bool dominates =
                lut.entries[b].expected_fwd_macs <= lut.entries[a].expected_fwd_macs &&
                daccs[b] >= daccs[a] &&
                (lut.entries[b].expected_fwd_macs < lut.entries[a].expected_fwd_macs ||
                 daccs[b] > daccs[a]);
            CHECK(!dominates);
        }
}

TEST_CASE("short training fitness on a desk-scale context") {
    NetworkSpec net;
    net.input_dims = {1, 8, 8};
    net.layers = {Layer::SparseBegin(), Layer::Conv(6, 3, 3), Layer::ReLU(),
                  Layer::Conv(8, 3, 3),  Layer::ReLU(),       Layer::SparseEnd(),
                  Layer::Flatten(),      Layer::Dense(4)};
    net.validate();

    // train and validation must be disjoint slices of one distribution
    Dataset full_data = synthesize(4, 100, 8, 0.4, 31);
    std::vector<int> all_idx(static_cast<std::size_t>(full_data.size()));
    for (std::size_t i = 0; i < all_idx.size(); ++i) all_idx[i] = static_cast<int>(i);
    Dataset train = gather(full_data, {all_idx.begin(), all_idx.begin() + 240});
    Dataset val = gather(full_data, {all_idx.begin() + 240, all_idx.end()});
    Dataset distorted = distort(train, Distortion::rotate90, 33);

    DseParams p;
    p.population = 8;
    p.generations = 2;
    p.short_train_batches = 16;
    p.short_train_batch_size = 16;
    p.short_train_lr = 0.02;
    p.pretrain_steps = 30;
    p.pretrain_batch_size = 16;
    p.pretrain_lr = 0.02;
    p.seeds = {5, 6, 7};
    p.validation_samples = 160;

    SUBCASE("zero pretrain steps return the raw init") {
        DseParams q = p;
        q.pretrain_steps = 0;
        Weights w = pretrain_snapshot(net, distorted, q, 5);
        Rng wrng = make_rng(5, Stream::weight_init);
        Weights fresh = Weights::init(net, wrng);
        CHECK(w.params[1].w == fresh.params[1].w);
    }
    SUBCASE("snapshots are deterministic and better than chance") {
        Weights a = pretrain_snapshot(net, distorted, p, 5);
        Weights b = pretrain_snapshot(net, distorted, p, 5);
        CHECK(a.params[1].w == b.params[1].w);
        // trained on rotated data, evaluated on clean: above chance thanks to
        // shared low-level structure
        const double acc = evaluate(net, a, val.images, val.labels);
        CHECK(acc > 0.0);
    }

    FitnessContext ctx = make_fitness_context(net, train, val, distorted, p);

    SUBCASE("endpoints map to (1,0) and (0,1)") {
        auto [f1z, f2z] = fitness(ctx, {0.0, 0.0});
        CHECK(f1z == doctest::Approx(1.0));
        CHECK(f2z == doctest::Approx(0.0));
        auto [f1h, f2h] = fitness(ctx, {0.5, 0.5});
        CHECK(f1h == doctest::Approx(0.0));
        CHECK(f2h == doctest::Approx(1.0));
    }
    SUBCASE("halfway MACs give f1 = 0.5") {
        // bisect a uniform rate whose MACs sit midway between the endpoints
        const double target = 0.5 * (ctx.macs_zero + ctx.macs_half);
        double lo = 0.0, hi = 0.5;
        for (int i = 0; i < 60; ++i) {
            const double mid = 0.5 * (lo + hi);
            (network_expected_macs(net, {mid, mid}).total > target ? lo : hi) = mid;
        }
        auto [f1, f2] = fitness(ctx, {lo, lo});
        (void)f2;
        CHECK(f1 == doctest::Approx(0.5).epsilon(1e-6));
    }
    SUBCASE("delta-acc is deterministic and zero at lr = 0") {
        const double a = short_train_delta_acc(ctx, {0.2, 0.3}, 0);
        const double b = short_train_delta_acc(ctx, {0.2, 0.3}, 0);
        CHECK(a == b);

        FitnessContext frozen = ctx;
        frozen.params.short_train_lr = 0.0;
        CHECK(short_train_delta_acc(frozen, {0.2, 0.3}, 0) == 0.0);
    }
    SUBCASE("dropout slows short-training convergence on average") {
        double full = 0.0, half = 0.0;
        for (int s = 0; s < 3; ++s) {
            full += short_train_delta_acc(ctx, {0.0, 0.0}, s);
            half += short_train_delta_acc(ctx, {0.5, 0.5}, s);
        }
        CHECK(full / 3 >= half / 3);
        CHECK(full / 3 == doctest::Approx(ctx.dacc_zero));
        CHECK(half / 3 == doctest::Approx(ctx.dacc_half));
    }
}
