#include "distreal/dse.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <stdexcept>

#include "distreal/engine.hpp"
#include "distreal/mac_model.hpp"

namespace distreal {

namespace {

constexpr std::uint64_t kPretrainTag = 0x70;
constexpr std::uint64_t kShortBatchTag = 0x71;
constexpr std::uint64_t kShortMaskTag = 0x72;

void train_step(const NetworkSpec& spec, Weights& w, const Dataset& pool, Rng& batch_rng,
                const MaskSet& masks, int batch_size, double lr, double momentum,
                double weight_decay) {
    std::vector<int> idx(static_cast<std::size_t>(batch_size));
    for (auto& i : idx)
        i = static_cast<int>(batch_rng.uniform_int(static_cast<std::uint64_t>(pool.size())));
    Tensor4 images;
    std::vector<int> labels;
    make_batch(pool, idx, 0, batch_size, images, labels);
    ForwardCache cache;
    forward(spec, w, images, &masks, true, &cache);
    double loss = 0.0;
    Gradients g = backward(spec, w, cache, labels, &loss);
    if (!std::isfinite(loss)) throw numerical_error("training diverged (non-finite loss)");
    sgd_step(spec, w, g, lr, momentum, weight_decay);
}

}  // namespace

Weights pretrain_snapshot(const NetworkSpec& spec, const Dataset& distorted,
                          const DseParams& params, std::uint64_t seed) {
    if (distorted.size() == 0) throw std::invalid_argument("pretrain: empty distorted dataset");
    Rng wrng = make_rng(seed, Stream::weight_init);
    Weights w = Weights::init(spec, wrng);
    const MaskSet full = MaskSet::full(spec);
    for (int step = 0; step < params.pretrain_steps; ++step) {
        Rng brng = make_rng(seed, Stream::dse_short_train,
                            {kPretrainTag, static_cast<std::uint64_t>(step)});
        train_step(spec, w, distorted, brng, full, params.pretrain_batch_size,
                   params.pretrain_lr, params.momentum, params.weight_decay);
    }
    return w;
}

double short_train_delta_acc(const FitnessContext& ctx, const DropoutVector& d,
                             int seed_index) {
    const DseParams& p = ctx.params;
    const std::uint64_t seed = p.seeds[static_cast<std::size_t>(seed_index)];
    Weights w = ctx.snapshots[static_cast<std::size_t>(seed_index)];
    w.zero_momentum();
    for (int step = 0; step < p.short_train_batches; ++step) {
        Rng brng = make_rng(seed, Stream::dse_short_train,
                            {kShortBatchTag, static_cast<std::uint64_t>(step)});
        Rng mrng = make_rng(seed, Stream::dse_short_train,
                            {kShortMaskTag, static_cast<std::uint64_t>(step)});
        MaskSet masks = sample_masks(d, ctx.spec, mrng);
        train_step(ctx.spec, w, ctx.train, brng, masks, p.short_train_batch_size,
                   p.short_train_lr, p.momentum, p.weight_decay);
    }
    const double after = evaluate(ctx.spec, w, ctx.validation.images, ctx.validation.labels);
    return after - ctx.snapshot_acc[static_cast<std::size_t>(seed_index)];
}

namespace {

double mean_delta_acc(const FitnessContext& ctx, const DropoutVector& d) {
    double acc = 0.0;
    for (std::size_t s = 0; s < ctx.params.seeds.size(); ++s)
        acc += short_train_delta_acc(ctx, d, static_cast<int>(s));
    return acc / static_cast<double>(ctx.params.seeds.size());
}

}  // namespace

FitnessContext make_fitness_context(const NetworkSpec& spec, const Dataset& clean_train,
                                    const Dataset& validation, const Dataset& distorted,
                                    const DseParams& params) {
    FitnessContext ctx;
    ctx.spec = spec;
    ctx.params = params;
    ctx.train = clean_train;
    ctx.validation = validation;

    const int n_seeds = static_cast<int>(params.seeds.size());
    ctx.snapshots.resize(static_cast<std::size_t>(n_seeds));
    ctx.snapshot_acc.resize(static_cast<std::size_t>(n_seeds));
#pragma omp parallel for schedule(dynamic)
    for (int s = 0; s < n_seeds; ++s) {
        ctx.snapshots[static_cast<std::size_t>(s)] =
            pretrain_snapshot(spec, distorted, params, params.seeds[static_cast<std::size_t>(s)]);
        ctx.snapshot_acc[static_cast<std::size_t>(s)] =
            evaluate(spec, ctx.snapshots[static_cast<std::size_t>(s)], validation.images,
                     validation.labels);
    }

    const std::size_t k = static_cast<std::size_t>(spec.conv_count());
    const DropoutVector zeros(k, params.rate_lo), halves(k, params.rate_hi);
    ctx.macs_zero = network_expected_macs(spec, zeros).total;
    ctx.macs_half = network_expected_macs(spec, halves).total;
    if (!(ctx.macs_zero > ctx.macs_half))
        throw std::runtime_error("fitness context: MACs endpoints not separated");

    std::vector<double> endpoint_dacc(static_cast<std::size_t>(2 * n_seeds), 0.0);
#pragma omp parallel for collapse(2) schedule(dynamic)
    for (int e = 0; e < 2; ++e) {
        for (int s = 0; s < n_seeds; ++s) {
            endpoint_dacc[static_cast<std::size_t>(e * n_seeds + s)] =
                short_train_delta_acc(ctx, e == 0 ? zeros : halves, s);
        }
    }
    double dacc[2] = {0.0, 0.0};
    for (int e = 0; e < 2; ++e)
        for (int s = 0; s < n_seeds; ++s)
            dacc[e] += endpoint_dacc[static_cast<std::size_t>(e * n_seeds + s)];
    ctx.dacc_zero = dacc[0] / n_seeds;
    ctx.dacc_half = dacc[1] / n_seeds;
    if (std::fabs(ctx.dacc_zero - ctx.dacc_half) < 1e-4)
        throw std::runtime_error(
            "fitness context: endpoint delta-acc gap below 1e-4; increase short-training "
            "steps or dataset difficulty");
    return ctx;
}

std::pair<double, double> fitness(const FitnessContext& ctx, const DropoutVector& d,
                                  double* macs_out, double* dacc_out) {
    const double macs = network_expected_macs(ctx.spec, d).total;
    double dacc;
    try {
        dacc = mean_delta_acc(ctx, d);
    } catch (const numerical_error&) {
        std::fprintf(stderr, "dse: short training diverged; assigning worst delta-acc\n");
        dacc = ctx.dacc_half;
    }
    if (macs_out) *macs_out = macs;
    if (dacc_out) *dacc_out = dacc;
    const double f1 = (macs - ctx.macs_half) / (ctx.macs_zero - ctx.macs_half);
    const double f2 = (ctx.dacc_zero - dacc) / (ctx.dacc_zero - ctx.dacc_half);
    return {f1, f2};
}

std::vector<std::vector<int>> fast_non_dominated_sort(
    const std::vector<std::pair<double, double>>& points) {
    const int n = static_cast<int>(points.size());
    auto dominates = [&points](int a, int b) {
        return points[static_cast<std::size_t>(a)].first <=
                   points[static_cast<std::size_t>(b)].first &&
               points[static_cast<std::size_t>(a)].second <=
                   points[static_cast<std::size_t>(b)].second &&
               (points[static_cast<std::size_t>(a)].first <
                    points[static_cast<std::size_t>(b)].first ||
                points[static_cast<std::size_t>(a)].second <
                    points[static_cast<std::size_t>(b)].second);
    };

    std::vector<std::vector<int>> dominated(static_cast<std::size_t>(n));
    std::vector<int> dom_count(static_cast<std::size_t>(n), 0);
    std::vector<std::vector<int>> fronts;
    std::vector<int> current;
    for (int p = 0; p < n; ++p) {
        for (int q = 0; q < n; ++q) {
            if (p == q) continue;
            if (dominates(p, q))
                dominated[static_cast<std::size_t>(p)].push_back(q);
            else if (dominates(q, p))
                ++dom_count[static_cast<std::size_t>(p)];
        }
        if (dom_count[static_cast<std::size_t>(p)] == 0) current.push_back(p);
    }
    while (!current.empty()) {
        fronts.push_back(current);
        std::vector<int> next;
        for (int p : current)
            for (int q : dominated[static_cast<std::size_t>(p)])
                if (--dom_count[static_cast<std::size_t>(q)] == 0) next.push_back(q);
        std::sort(next.begin(), next.end());
        current = std::move(next);
    }
    return fronts;
}

std::vector<double> crowding_distance(const std::vector<std::pair<double, double>>& front) {
    const int n = static_cast<int>(front.size());
    if (n == 0) throw std::invalid_argument("crowding_distance: empty front");
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(static_cast<std::size_t>(n), 0.0);
    std::vector<int> order(static_cast<std::size_t>(n));
    for (int obj = 0; obj < 2; ++obj) {
        for (int i = 0; i < n; ++i) order[static_cast<std::size_t>(i)] = i;
        std::sort(order.begin(), order.end(), [&front, obj](int a, int b) {
            const double va = obj == 0 ? front[static_cast<std::size_t>(a)].first
                                       : front[static_cast<std::size_t>(a)].second;
            const double vb = obj == 0 ? front[static_cast<std::size_t>(b)].first
                                       : front[static_cast<std::size_t>(b)].second;
            return va != vb ? va < vb : a < b;
        });
        auto value = [&front, obj](int i) {
            return obj == 0 ? front[static_cast<std::size_t>(i)].first
                            : front[static_cast<std::size_t>(i)].second;
        };
        dist[static_cast<std::size_t>(order.front())] = inf;
        dist[static_cast<std::size_t>(order.back())] = inf;
        const double span = value(order.back()) - value(order.front());
        if (span <= 0.0) continue;
        for (int i = 1; i + 1 < n; ++i) {
            auto& d = dist[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
            if (std::isinf(d)) continue;
            d += (value(order[static_cast<std::size_t>(i + 1)]) -
                  value(order[static_cast<std::size_t>(i - 1)])) /
                 span;
        }
    }
    return dist;
}

void sbx_crossover(const DropoutVector& parent_a, const DropoutVector& parent_b, double prob,
                   double eta, double lo, double hi, Rng& rng, DropoutVector& child_a,
                   DropoutVector& child_b) {
    child_a = parent_a;
    child_b = parent_b;
    if (parent_a.size() != parent_b.size())
        throw std::invalid_argument("sbx_crossover: parent length mismatch");
    if (rng.u01() > prob) return;
    for (std::size_t i = 0; i < parent_a.size(); ++i) {
        if (rng.u01() > 0.5) continue;
        double y1 = parent_a[i], y2 = parent_b[i];
        if (std::fabs(y1 - y2) < 1e-14) continue;
        if (y1 > y2) std::swap(y1, y2);
        const double rand = rng.u01();

        double beta = 1.0 + 2.0 * (y1 - lo) / (y2 - y1);
        double alpha = 2.0 - std::pow(beta, -(eta + 1.0));
        double betaq = rand <= 1.0 / alpha
                           ? std::pow(rand * alpha, 1.0 / (eta + 1.0))
                           : std::pow(1.0 / (2.0 - rand * alpha), 1.0 / (eta + 1.0));
        double c1 = 0.5 * ((y1 + y2) - betaq * (y2 - y1));

        beta = 1.0 + 2.0 * (hi - y2) / (y2 - y1);
        alpha = 2.0 - std::pow(beta, -(eta + 1.0));
        betaq = rand <= 1.0 / alpha
                    ? std::pow(rand * alpha, 1.0 / (eta + 1.0))
                    : std::pow(1.0 / (2.0 - rand * alpha), 1.0 / (eta + 1.0));
        double c2 = 0.5 * ((y1 + y2) + betaq * (y2 - y1));

        c1 = std::clamp(c1, lo, hi);
        c2 = std::clamp(c2, lo, hi);
        if (rng.u01() <= 0.5) std::swap(c1, c2);
        child_a[i] = c1;
        child_b[i] = c2;
    }
}

void polynomial_mutation(DropoutVector& genes, double prob, double eta, double lo, double hi,
                         Rng& rng) {
    for (double& g : genes) {
        if (rng.u01() > prob) continue;
        const double delta1 = (g - lo) / (hi - lo);
        const double delta2 = (hi - g) / (hi - lo);
        const double rnd = rng.u01();
        const double mut_pow = 1.0 / (eta + 1.0);
        double deltaq;
        if (rnd <= 0.5) {
            const double xy = 1.0 - delta1;
            const double val = 2.0 * rnd + (1.0 - 2.0 * rnd) * std::pow(xy, eta + 1.0);
            deltaq = std::pow(val, mut_pow) - 1.0;
        } else {
            const double xy = 1.0 - delta2;
            const double val =
                2.0 * (1.0 - rnd) + 2.0 * (rnd - 0.5) * std::pow(xy, eta + 1.0);
            deltaq = 1.0 - std::pow(val, mut_pow);
        }
        g = std::clamp(g + deltaq * (hi - lo), lo, hi);
    }
}

double hypervolume_2d(const std::vector<std::pair<double, double>>& points, double ref_f1,
                      double ref_f2) {
    auto fronts = fast_non_dominated_sort(points);
    if (fronts.empty()) return 0.0;
    std::vector<std::pair<double, double>> fr;
    for (int i : fronts[0]) fr.push_back(points[static_cast<std::size_t>(i)]);
    std::sort(fr.begin(), fr.end());
    double hv = 0.0, prev_f2 = ref_f2;
    for (const auto& [f1, f2] : fr) {
        if (f1 >= ref_f1 || f2 >= prev_f2) continue;
        hv += (ref_f1 - f1) * (prev_f2 - f2);
        prev_f2 = f2;
    }
    return hv;
}

namespace {

using Key = std::vector<long long>;

Key quantize(const DropoutVector& d) {
    Key k(d.size());
    for (std::size_t i = 0; i < d.size(); ++i) k[i] = std::llround(d[i] * 1e6);
    return k;
}

struct EvalResult {
    double f1, f2, macs, dacc;
};

struct BatchEvaluator {
    const FitnessFn& fn;
    std::map<Key, EvalResult> cache;

    std::vector<EvalResult> operator()(const std::vector<DropoutVector>& ds) {
        std::vector<EvalResult> out(ds.size());
        std::vector<Key> keys(ds.size());
        std::map<Key, int> first_at;  // representative index per unique uncached key
        std::vector<int> reps;
        for (std::size_t i = 0; i < ds.size(); ++i) {
            keys[i] = quantize(ds[i]);
            if (cache.count(keys[i])) continue;
            if (first_at.emplace(keys[i], static_cast<int>(i)).second)
                reps.push_back(static_cast<int>(i));
        }
        std::vector<EvalResult> fresh(reps.size());
#pragma omp parallel for schedule(dynamic)
        for (int r = 0; r < static_cast<int>(reps.size()); ++r) {
            const auto& d = ds[static_cast<std::size_t>(reps[static_cast<std::size_t>(r)])];
            EvalResult e{};
            auto [f1, f2] = fn(d, &e.macs, &e.dacc);
            e.f1 = f1;
            e.f2 = f2;
            fresh[static_cast<std::size_t>(r)] = e;
        }
        for (std::size_t r = 0; r < reps.size(); ++r)
            cache.emplace(keys[static_cast<std::size_t>(reps[r])], fresh[r]);
        for (std::size_t i = 0; i < ds.size(); ++i) out[i] = cache.at(keys[i]);
        return out;
    }
};

std::vector<Individual> make_individuals(const std::vector<DropoutVector>& ds,
                                         const std::vector<EvalResult>& evals) {
    std::vector<Individual> pop(ds.size());
    for (std::size_t i = 0; i < ds.size(); ++i) {
        pop[i].d = ds[i];
        pop[i].macs = evals[i].macs;
        pop[i].delta_acc = evals[i].dacc;
        pop[i].f1 = evals[i].f1;
        pop[i].f2 = evals[i].f2;
    }
    return pop;
}

std::vector<std::pair<double, double>> objective_points(const std::vector<Individual>& pop) {
    std::vector<std::pair<double, double>> pts(pop.size());
    for (std::size_t i = 0; i < pop.size(); ++i) pts[i] = {pop[i].f1, pop[i].f2};
    return pts;
}

void merge_archive(std::vector<Individual>& archive, const std::vector<Individual>& fresh) {
    for (const auto& ind : fresh) {
        bool dominated_or_dup = false;
        for (const auto& a : archive) {
            if (a.f1 == ind.f1 && a.f2 == ind.f2) {
                dominated_or_dup = true;
                break;
            }
            if (a.f1 <= ind.f1 && a.f2 <= ind.f2 && (a.f1 < ind.f1 || a.f2 < ind.f2)) {
                dominated_or_dup = true;
                break;
            }
        }
        if (dominated_or_dup) continue;
        std::erase_if(archive, [&ind](const Individual& a) {
            return ind.f1 <= a.f1 && ind.f2 <= a.f2 && (ind.f1 < a.f1 || ind.f2 < a.f2);
        });
        archive.push_back(ind);
    }
}

DseResult run_impl(int genes, const DseParams& params, std::uint64_t master_seed,
                   const FitnessFn& fn, const NetworkSpec* spec_for_macs,
                   std::uint64_t fingerprint) {
    const int P = params.population;
    if (P < 4 || P % 2 != 0)
        throw std::invalid_argument("nsga2: population must be even and >= 4");
    if (genes < 1) throw std::invalid_argument("nsga2: need at least one gene");

    BatchEvaluator evaluator{fn, {}};

    // 62 random vectors plus the two endpoint vectors
    std::vector<DropoutVector> ds;
    ds.reserve(static_cast<std::size_t>(P));
    ds.emplace_back(static_cast<std::size_t>(genes), params.rate_lo);
    ds.emplace_back(static_cast<std::size_t>(genes), params.rate_hi);
    Rng init_rng = make_rng(master_seed, Stream::dse_init);
    for (int i = 2; i < P; ++i) {
        DropoutVector d(static_cast<std::size_t>(genes));
        for (auto& g : d) g = init_rng.uniform(params.rate_lo, params.rate_hi);
        ds.push_back(std::move(d));
    }
    std::vector<Individual> pop = make_individuals(ds, evaluator(ds));

    DseResult result;
    result.generations.push_back(pop);
    merge_archive(result.archive, pop);
    result.front_hypervolume.push_back(hypervolume_2d(objective_points(result.archive)));

    for (int gen = 1; gen <= params.generations; ++gen) {
        // rank + crowding of the current population for tournament selection
        auto fronts = fast_non_dominated_sort(objective_points(pop));
        std::vector<int> rank(pop.size(), 0);
        std::vector<double> crowd(pop.size(), 0.0);
        for (std::size_t f = 0; f < fronts.size(); ++f) {
            std::vector<std::pair<double, double>> fp;
            for (int i : fronts[f]) fp.push_back({pop[static_cast<std::size_t>(i)].f1,
                                                  pop[static_cast<std::size_t>(i)].f2});
            auto cd = crowding_distance(fp);
            for (std::size_t j = 0; j < fronts[f].size(); ++j) {
                rank[static_cast<std::size_t>(fronts[f][j])] = static_cast<int>(f);
                crowd[static_cast<std::size_t>(fronts[f][j])] = cd[j];
            }
        }

        Rng vrng = make_rng(master_seed, Stream::dse_variation,
                            {static_cast<std::uint64_t>(gen)});
        auto tournament = [&](Rng& rng) {
            const int a = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(P)));
            const int b = static_cast<int>(rng.uniform_int(static_cast<std::uint64_t>(P)));
            const auto sa = rank[static_cast<std::size_t>(a)];
            const auto sb = rank[static_cast<std::size_t>(b)];
            if (sa != sb) return sa < sb ? a : b;
            const auto ca = crowd[static_cast<std::size_t>(a)];
            const auto cb = crowd[static_cast<std::size_t>(b)];
            if (ca != cb) return ca > cb ? a : b;
            return std::min(a, b);
        };

        std::vector<DropoutVector> offspring;
        offspring.reserve(static_cast<std::size_t>(P));
        for (int k = 0; k < P / 2; ++k) {
            const int a = tournament(vrng), b = tournament(vrng);
            DropoutVector ca, cb;
            sbx_crossover(pop[static_cast<std::size_t>(a)].d,
                          pop[static_cast<std::size_t>(b)].d, params.crossover_prob,
                          params.crossover_eta, params.rate_lo, params.rate_hi, vrng, ca, cb);
            polynomial_mutation(ca, params.mutation_prob, params.mutation_eta, params.rate_lo,
                                params.rate_hi, vrng);
            polynomial_mutation(cb, params.mutation_prob, params.mutation_eta, params.rate_lo,
                                params.rate_hi, vrng);
            offspring.push_back(std::move(ca));
            offspring.push_back(std::move(cb));
        }
        std::vector<Individual> children = make_individuals(offspring, evaluator(offspring));

        // elitist environmental selection from the union
        std::vector<Individual> uni = pop;
        uni.insert(uni.end(), children.begin(), children.end());
        auto ufronts = fast_non_dominated_sort(objective_points(uni));
        std::vector<Individual> next;
        next.reserve(static_cast<std::size_t>(P));
        for (const auto& front : ufronts) {
            if (static_cast<int>(next.size()) == P) break;
            if (static_cast<int>(next.size() + front.size()) <= P) {
                for (int i : front) next.push_back(uni[static_cast<std::size_t>(i)]);
                continue;
            }
            std::vector<std::pair<double, double>> fp;
            for (int i : front) fp.push_back({uni[static_cast<std::size_t>(i)].f1,
                                              uni[static_cast<std::size_t>(i)].f2});
            auto cd = crowding_distance(fp);
            std::vector<int> order(front.size());
            for (std::size_t j = 0; j < front.size(); ++j) order[j] = static_cast<int>(j);
            std::sort(order.begin(), order.end(), [&](int x, int y) {
                if (cd[static_cast<std::size_t>(x)] != cd[static_cast<std::size_t>(y)])
                    return cd[static_cast<std::size_t>(x)] > cd[static_cast<std::size_t>(y)];
                return front[static_cast<std::size_t>(x)] < front[static_cast<std::size_t>(y)];
            });
            for (int j : order) {
                if (static_cast<int>(next.size()) == P) break;
                next.push_back(uni[static_cast<std::size_t>(front[static_cast<std::size_t>(j)])]);
            }
        }
        pop = std::move(next);
        result.generations.push_back(pop);
        merge_archive(result.archive, children);
        result.front_hypervolume.push_back(hypervolume_2d(objective_points(result.archive)));
    }

    result.lut = extract_pareto_lut(pop, spec_for_macs, fingerprint);
    return result;
}

}  // namespace

DseResult nsga2_run(const FitnessContext& ctx, std::uint64_t master_seed) {
    FitnessFn fn = [&ctx](const DropoutVector& d, double* macs, double* dacc) {
        return fitness(ctx, d, macs, dacc);
    };
    return run_impl(ctx.spec.conv_count(), ctx.params, master_seed, fn, &ctx.spec,
                    ctx.spec.fingerprint());
}

DseResult nsga2_run_custom(int genes, const DseParams& params, std::uint64_t master_seed,
                           const FitnessFn& eval_fn, std::uint64_t lut_fingerprint) {
    return run_impl(genes, params, master_seed, eval_fn, nullptr, lut_fingerprint);
}

ParetoLUT extract_pareto_lut(const std::vector<Individual>& population,
                             const NetworkSpec* spec_for_macs, std::uint64_t fingerprint) {
    if (population.empty()) throw std::invalid_argument("extract_pareto_lut: empty population");
    auto fronts = fast_non_dominated_sort(objective_points(population));

    struct Row {
        DropoutVector d;
        double macs, dacc;
    };
    std::vector<Row> rows;
    for (int i : fronts[0]) {
        const Individual& ind = population[static_cast<std::size_t>(i)];
        Row r{ind.d, ind.macs, ind.delta_acc};
        // quantize to the LUT's 32-bit storage so save/load round-trips
        for (double& g : r.d) g = static_cast<double>(static_cast<float>(g));
        if (spec_for_macs) r.macs = network_expected_macs(*spec_for_macs, r.d).total;
        rows.push_back(std::move(r));
    }
    std::sort(rows.begin(), rows.end(), [](const Row& a, const Row& b) {
        if (a.macs != b.macs) return a.macs < b.macs;
        return a.dacc > b.dacc;
    });
    ParetoLUT lut;
    lut.fingerprint = fingerprint;
    for (const auto& r : rows) {
        if (!lut.entries.empty() && r.macs == lut.entries.back().expected_fwd_macs)
            continue;  // objective-value duplicate (keeps the better delta-acc)
        lut.entries.push_back({r.d, r.macs});
    }
    lut.validate();
    return lut;
}

}  // namespace distreal
