#include "distreal/experiment.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

#include "distreal/mac_model.hpp"
#include "distreal/resource_sim.hpp"
#include "distreal/rng.hpp"

namespace distreal {

using nlohmann::json;

void ExperimentConfig::validate() const {
    if (seeds.empty()) throw std::invalid_argument("config: seeds must be non-empty");
    if (lambda_rate < 0) throw std::invalid_argument("config: lambda must be >= 0");
    if (devices < 1 || per_round < 1 || per_round > devices)
        throw std::invalid_argument("config: need 1 <= per_round <= devices");
    if (rounds < 1 || batch_size < 1)
        throw std::invalid_argument("config: rounds and batch_size must be >= 1");
    if (variability < 1.0) throw std::invalid_argument("config: variability must be >= 1");
    if (network != "desk" && network != "femnist")
        throw std::invalid_argument("config: unknown network preset " + network);
    if (partition_mode != "iid" && partition_mode != "non_iid_shards")
        throw std::invalid_argument("config: unknown partition mode " + partition_mode);
    if (dataset.kind != "synthetic" && dataset.kind != "idx")
        throw std::invalid_argument("config: unknown dataset kind " + dataset.kind);
    for (const auto& t : techniques) technique_from_string(t);
}

namespace {

json dataset_to_json(const DatasetConfig& d) {
    return json{{"kind", d.kind},
                {"classes", d.classes},
                {"samples_per_class", d.samples_per_class},
                {"image_size", d.image_size},
                {"difficulty", d.difficulty},
                {"seed", d.seed},
                {"images_path", d.images_path},
                {"labels_path", d.labels_path}};
}

json dse_to_json(const DseParams& p) {
    return json{{"population", p.population},
                {"generations", p.generations},
                {"crossover_prob", p.crossover_prob},
                {"crossover_eta", p.crossover_eta},
                {"mutation_prob", p.mutation_prob},
                {"mutation_eta", p.mutation_eta},
                {"short_train_batches", p.short_train_batches},
                {"short_train_batch_size", p.short_train_batch_size},
                {"short_train_lr", p.short_train_lr},
                {"pretrain_steps", p.pretrain_steps},
                {"pretrain_batch_size", p.pretrain_batch_size},
                {"pretrain_lr", p.pretrain_lr},
                {"seeds", p.seeds},
                {"validation_samples", p.validation_samples}};
}

template <typename T>
void maybe(const json& j, const char* key, T& out) {
    if (j.contains(key)) out = j.at(key).get<T>();
}

}  // namespace

std::string config_to_json(const ExperimentConfig& c) {
    json j{{"master_seed", c.master_seed},
           {"network", c.network},
           {"dataset", dataset_to_json(c.dataset)},
           {"partition_mode", c.partition_mode},
           {"samples_per_device", c.samples_per_device},
           {"devices", c.devices},
           {"per_round", c.per_round},
           {"rounds", c.rounds},
           {"batch_size", c.batch_size},
           {"lr", c.lr},
           {"momentum", c.momentum},
           {"weight_decay", c.weight_decay},
           {"seeds", c.seeds},
           {"techniques", c.techniques},
           {"lut_path", c.lut_path},
           {"variability", c.variability},
           {"lambda", c.lambda_rate},
           {"round_duration", c.round_duration},
           {"training_factor", c.training_factor},
           {"heterofl_s", c.heterofl_s},
           {"heterofl_levels", c.heterofl_levels},
           {"small_nn_scale", c.small_nn_scale},
           {"eval_samples", c.eval_samples},
           {"dse", dse_to_json(c.dse)},
           {"dse_distortion", c.dse_distortion},
           {"output_dir", c.output_dir}};
    return j.dump(2) + "\n";
}

ExperimentConfig config_from_json(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        throw std::runtime_error(std::string("config: JSON parse error: ") + e.what());
    }
    ExperimentConfig c;
    maybe(j, "master_seed", c.master_seed);
    maybe(j, "network", c.network);
    if (j.contains("dataset")) {
        const json& d = j.at("dataset");
        maybe(d, "kind", c.dataset.kind);
        maybe(d, "classes", c.dataset.classes);
        maybe(d, "samples_per_class", c.dataset.samples_per_class);
        maybe(d, "image_size", c.dataset.image_size);
        maybe(d, "difficulty", c.dataset.difficulty);
        maybe(d, "seed", c.dataset.seed);
        maybe(d, "images_path", c.dataset.images_path);
        maybe(d, "labels_path", c.dataset.labels_path);
    }
    maybe(j, "partition_mode", c.partition_mode);
    maybe(j, "samples_per_device", c.samples_per_device);
    maybe(j, "devices", c.devices);
    maybe(j, "per_round", c.per_round);
    maybe(j, "rounds", c.rounds);
    maybe(j, "batch_size", c.batch_size);
    maybe(j, "lr", c.lr);
    maybe(j, "momentum", c.momentum);
    maybe(j, "weight_decay", c.weight_decay);
    maybe(j, "seeds", c.seeds);
    maybe(j, "techniques", c.techniques);
    maybe(j, "lut_path", c.lut_path);
    maybe(j, "variability", c.variability);
    maybe(j, "lambda", c.lambda_rate);
    maybe(j, "round_duration", c.round_duration);
    maybe(j, "training_factor", c.training_factor);
    maybe(j, "heterofl_s", c.heterofl_s);
    maybe(j, "heterofl_levels", c.heterofl_levels);
    maybe(j, "small_nn_scale", c.small_nn_scale);
    maybe(j, "eval_samples", c.eval_samples);
    if (j.contains("dse")) {
        const json& d = j.at("dse");
        maybe(d, "population", c.dse.population);
        maybe(d, "generations", c.dse.generations);
        maybe(d, "crossover_prob", c.dse.crossover_prob);
        maybe(d, "crossover_eta", c.dse.crossover_eta);
        maybe(d, "mutation_prob", c.dse.mutation_prob);
        maybe(d, "mutation_eta", c.dse.mutation_eta);
        maybe(d, "short_train_batches", c.dse.short_train_batches);
        maybe(d, "short_train_batch_size", c.dse.short_train_batch_size);
        maybe(d, "short_train_lr", c.dse.short_train_lr);
        maybe(d, "pretrain_steps", c.dse.pretrain_steps);
        maybe(d, "pretrain_batch_size", c.dse.pretrain_batch_size);
        maybe(d, "pretrain_lr", c.dse.pretrain_lr);
        maybe(d, "seeds", c.dse.seeds);
        maybe(d, "validation_samples", c.dse.validation_samples);
    }
    maybe(j, "dse_distortion", c.dse_distortion);
    maybe(j, "output_dir", c.output_dir);
    c.validate();
    return c;
}

ExperimentConfig load_config(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("config: cannot open " + path);
    std::stringstream ss;
    ss << is.rdbuf();
    return config_from_json(ss.str());
}

void write_manifest(const ExperimentConfig& cfg, const std::string& path) {
    json j = json::parse(config_to_json(cfg));
    json m{{"code_version", kCodeVersion}, {"config", j}};
    std::ofstream os(path);
    if (!os) throw std::runtime_error("manifest: cannot write " + path);
    os << m.dump(2) << "\n";
}

NetworkSpec network_from_config(const ExperimentConfig& cfg) {
    if (cfg.network == "femnist") return femnist_network();
    return desk_network(cfg.dataset.classes, cfg.dataset.image_size);
}

double auto_small_nn_scale(const NetworkSpec& net, double variability) {
    const DropoutVector zeros(static_cast<std::size_t>(net.conv_count()), 0.0);
    const double full = network_expected_macs(net, zeros).total;
    for (double scale = 0.95; scale > 0.051; scale -= 0.05) {
        NetworkSpec s = scale_filters(net, scale);
        const DropoutVector z(static_cast<std::size_t>(s.conv_count()), 0.0);
        if (network_expected_macs(s, z).total <= full / variability) return scale;
    }
    return 0.05;
}

Environment build_environment(const ExperimentConfig& cfg) {
    cfg.validate();
    Environment env;
    env.net = network_from_config(cfg);
    const double small_scale = cfg.small_nn_scale > 0
                                   ? cfg.small_nn_scale
                                   : auto_small_nn_scale(env.net, cfg.variability);
    env.small_net = scale_filters(env.net, small_scale);

    Dataset full;
    if (cfg.dataset.kind == "synthetic") {
        full = synthesize(cfg.dataset.classes, cfg.dataset.samples_per_class,
                          cfg.dataset.image_size, cfg.dataset.difficulty, cfg.dataset.seed);
    } else {
        full = load_idx(cfg.dataset.images_path, cfg.dataset.labels_path);
    }

    // dataset-level shuffle (seed-independent of the runs) before slicing
    std::vector<int> idx(static_cast<std::size_t>(full.size()));
    std::iota(idx.begin(), idx.end(), 0);
    Rng rng = make_rng(cfg.dataset.seed, Stream::data_partition, {0xD5});
    rng.shuffle(idx);

    const int n_pool = cfg.devices * cfg.samples_per_device;
    const int n_test = cfg.eval_samples;
    const int n_val = cfg.dse.validation_samples;
    const int n_dse = full.size() - n_pool - n_test - n_val;
    if (n_dse < cfg.dse.short_train_batch_size)
        throw std::invalid_argument(
            "config: dataset too small for the requested pool/test/validation split");

    auto slice = [&full, &idx](int begin, int end) {
        return gather(full, std::vector<int>(idx.begin() + begin, idx.begin() + end));
    };
    env.pool = slice(0, n_pool);
    env.test = slice(n_pool, n_pool + n_test);
    env.validation = slice(n_pool + n_test, n_pool + n_test + n_val);
    env.dse_pool = slice(n_pool + n_test + n_val, full.size());
    return env;
}

std::uint64_t hash_doubles(const std::vector<double>& v) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (double d : v) {
        std::uint64_t bits;
        static_assert(sizeof bits == sizeof d);
        __builtin_memcpy(&bits, &d, 8);
        for (int i = 0; i < 8; ++i) {
            h ^= (bits >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    }
    return h;
}

RunResult run_experiment(const Environment& env, const ExperimentConfig& cfg,
                         Technique technique, std::uint64_t run_seed, const ParetoLUT* lut) {
    const bool small = technique == Technique::small_nn;
    const NetworkSpec& net = small ? env.small_net : env.net;

    if (technique == Technique::distreal) {
        if (!lut) throw std::invalid_argument(
            "distreal requires a LUT; run the dse command first and point lut_path at its output");
        if (lut->fingerprint != net.fingerprint())
            throw std::invalid_argument("distreal: LUT fingerprint mismatch");
    }

    ClientConfig ccfg;
    ccfg.batch_size = cfg.batch_size;
    ccfg.lr = cfg.lr;
    ccfg.momentum = cfg.momentum;
    ccfg.weight_decay = cfg.weight_decay;
    ccfg.round_duration = cfg.round_duration;
    ccfg.training_factor = cfg.training_factor;
    ccfg.heterofl_s = cfg.heterofl_s;
    ccfg.heterofl_levels = cfg.heterofl_levels;

    const int local_batches = (cfg.samples_per_device + cfg.batch_size - 1) / cfg.batch_size;
    // ranges are calibrated on the full network for every technique
    const auto [low, high] = calibrate_range(env.net, cfg.variability, local_batches,
                                             cfg.batch_size, cfg.round_duration,
                                             cfg.training_factor);

    auto parts = partition(env.pool, cfg.devices, cfg.samples_per_device,
                           cfg.partition_mode == "iid" ? PartitionMode::iid
                                                       : PartitionMode::non_iid_shards,
                           run_seed);
    std::vector<DeviceState> devices(static_cast<std::size_t>(cfg.devices));
    const double horizon = cfg.rounds * cfg.round_duration;
    for (int i = 0; i < cfg.devices; ++i) {
        auto& d = devices[static_cast<std::size_t>(i)];
        d.id = i;
        d.data_idx = std::move(parts[static_cast<std::size_t>(i)]);
        Rng trng = make_rng(run_seed, Stream::resource_trace, {static_cast<std::uint64_t>(i)});
        d.trace = generate_trace(cfg.lambda_rate, low, high, horizon, trng);
    }

    Rng wrng = make_rng(run_seed, Stream::weight_init);
    Weights weights = Weights::init(net, wrng);
    std::vector<double> theta;
    weights.to_flat(theta);

    RunResult result;
    result.technique = technique;
    result.seed = run_seed;
    result.rounds.reserve(static_cast<std::size_t>(cfg.rounds));

    for (int round = 0; round < cfg.rounds; ++round) {
        Rng srng = make_rng(run_seed, Stream::device_selection,
                            {static_cast<std::uint64_t>(round)});
        std::vector<int> selected = srng.sample_without_replacement(cfg.devices, cfg.per_round);
        std::sort(selected.begin(), selected.end());

        std::vector<RoundUpdate> updates(selected.size());
#pragma omp parallel for schedule(dynamic)
        for (int k = 0; k < static_cast<int>(selected.size()); ++k) {
            const DeviceState& dev = devices[static_cast<std::size_t>(
                selected[static_cast<std::size_t>(k)])];
            RoundUpdate u;
            switch (technique) {
                case Technique::distreal:
                    u = client_train_distreal(net, weights, dev, env.pool, *lut, round, ccfg,
                                              run_seed);
                    break;
                case Technique::fedavg_full:
                case Technique::small_nn:
                    u = client_train_fedavg(net, weights, dev, env.pool, round, ccfg, run_seed);
                    break;
                case Technique::federated_dropout:
                    u = client_train_federated_dropout(net, weights, dev, env.pool, round, ccfg,
                                                       run_seed);
                    break;
                case Technique::heterofl:
                    u = client_train_heterofl(net, weights, dev, env.pool, round, ccfg,
                                              run_seed);
                    break;
            }
            updates[static_cast<std::size_t>(k)] = std::move(u);
        }

        theta = server_round(theta, updates);
        weights.from_flat(theta);

        RoundRecord rec;
        rec.round = round;
        rec.accuracy = evaluate(net, weights, env.test.images, env.test.labels);
        rec.theta_hash = hash_doubles(theta);
        for (const auto& u : updates) {
            rec.total_macs += u.c;
            if (u.straggler) ++rec.stragglers;
            result.budget_fallbacks += u.budget_fallbacks;
        }
        result.rounds.push_back(rec);
    }
    result.final_theta = std::move(theta);
    return result;
}

std::vector<RunResult> run_all(const Environment& env, const ExperimentConfig& cfg,
                               const ParetoLUT* lut) {
    struct Cell {
        Technique tech;
        std::uint64_t seed;
    };
    std::vector<Cell> cells;
    for (const auto& t : cfg.techniques)
        for (std::uint64_t s : cfg.seeds) cells.push_back({technique_from_string(t), s});

    std::vector<RunResult> results(cells.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(cells.size()); ++i) {
        results[static_cast<std::size_t>(i)] =
            run_experiment(env, cfg, cells[static_cast<std::size_t>(i)].tech,
                           cells[static_cast<std::size_t>(i)].seed, lut);
    }
    return results;
}

void write_convergence_csv(const std::vector<RunResult>& results, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("convergence: cannot write " + path);
    os << "#schema convergence 1\n";
    os << "technique,seed,round,accuracy,total_macs,stragglers\n";
    char buf[64];
    for (const auto& r : results) {
        for (const auto& rec : r.rounds) {
            os << technique_name(r.technique) << "," << r.seed << "," << rec.round << ",";
            std::snprintf(buf, sizeof buf, "%.17g", rec.accuracy);
            os << buf << ",";
            std::snprintf(buf, sizeof buf, "%.17g", rec.total_macs);
            os << buf << "," << rec.stragglers << "\n";
        }
    }
}

std::vector<RunResult> read_convergence_csv(const std::string& path) {
    std::ifstream is(path);
    if (!is) throw std::runtime_error("convergence: cannot open " + path);
    std::string line;
    if (!std::getline(is, line) || line != "#schema convergence 1")
        throw std::runtime_error("convergence: unknown schema in " + path);
    std::getline(is, line);  // column header

    std::vector<RunResult> out;
    auto find_run = [&out](Technique t, std::uint64_t seed) -> RunResult& {
        for (auto& r : out)
            if (r.technique == t && r.seed == seed) return r;
        out.push_back(RunResult{t, seed, {}, 0});
        return out.back();
    };
    while (std::getline(is, line)) {
        if (line.empty()) continue;
        std::stringstream ss(line);
        std::string tech, seed, round, acc, macs, stragglers;
        if (!std::getline(ss, tech, ',') || !std::getline(ss, seed, ',') ||
            !std::getline(ss, round, ',') || !std::getline(ss, acc, ',') ||
            !std::getline(ss, macs, ',') || !std::getline(ss, stragglers, ','))
            throw std::runtime_error("convergence: malformed row: " + line);
        RoundRecord rec;
        rec.round = std::stoi(round);
        rec.accuracy = std::stod(acc);
        rec.total_macs = std::stod(macs);
        rec.stragglers = std::stoi(stragglers);
        find_run(technique_from_string(tech), std::stoull(seed)).rounds.push_back(rec);
    }
    return out;
}

DseArtifacts run_dse(const Environment& env, const ExperimentConfig& cfg) {
    Dataset distorted = distort(env.dse_pool,
                                cfg.dse_distortion == "rotate90"
                                    ? Distortion::rotate90
                                    : Distortion::color_jitter_half,
                                cfg.dataset.seed);
    FitnessContext ctx =
        make_fitness_context(env.net, env.dse_pool, env.validation, distorted, cfg.dse);

    DseArtifacts art;
    art.result = nsga2_run(ctx, cfg.master_seed);

    // measured uniform-rate reference curve on the same protocol
    const std::size_t k = static_cast<std::size_t>(env.net.conv_count());
    std::vector<DropoutVector> uniform;
    for (double r = 0.0; r <= 0.5 + 1e-12; r += 0.05) uniform.emplace_back(k, std::min(r, 0.5));
    art.uniform_curve.resize(uniform.size());
#pragma omp parallel for schedule(dynamic)
    for (int i = 0; i < static_cast<int>(uniform.size()); ++i) {
        Individual ind;
        ind.d = uniform[static_cast<std::size_t>(i)];
        auto [f1, f2] = fitness(ctx, ind.d, &ind.macs, &ind.delta_acc);
        ind.f1 = f1;
        ind.f2 = f2;
        art.uniform_curve[static_cast<std::size_t>(i)] = ind;
    }
    return art;
}

namespace {

void write_individuals(std::ofstream& os, const std::vector<Individual>& pop, int generation) {
    char buf[64];
    for (const auto& ind : pop) {
        os << generation;
        for (double g : ind.d) {
            std::snprintf(buf, sizeof buf, "%.9g", g);
            os << "," << buf;
        }
        std::snprintf(buf, sizeof buf, "%.17g", ind.macs);
        os << "," << buf;
        std::snprintf(buf, sizeof buf, "%.17g", ind.delta_acc);
        os << "," << buf;
        std::snprintf(buf, sizeof buf, "%.17g", ind.f1);
        os << "," << buf;
        std::snprintf(buf, sizeof buf, "%.17g", ind.f2);
        os << "," << buf << "\n";
    }
}

void csv_header(std::ofstream& os, std::size_t genes) {
    os << "generation";
    for (std::size_t i = 0; i < genes; ++i) os << ",d" << i;
    os << ",macs,delta_acc,f1,f2\n";
}

}  // namespace

void write_generation_csv(const DseResult& result, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("dse: cannot write " + path);
    os << "#schema dse-generations 1\n";
    csv_header(os, result.generations.empty() || result.generations[0].empty()
                       ? 0
                       : result.generations[0][0].d.size());
    for (std::size_t g = 0; g < result.generations.size(); ++g)
        write_individuals(os, result.generations[g], static_cast<int>(g));
}

void write_uniform_curve_csv(const std::vector<Individual>& curve, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("dse: cannot write " + path);
    os << "#schema dse-uniform 1\n";
    csv_header(os, curve.empty() ? 0 : curve[0].d.size());
    write_individuals(os, curve, -1);
}

}  // namespace distreal
