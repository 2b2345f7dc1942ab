#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "distreal/data.hpp"
#include "distreal/dse.hpp"
#include "distreal/fl.hpp"
#include "distreal/lut.hpp"
#include "distreal/network.hpp"

namespace distreal {

inline constexpr const char* kCodeVersion = "distreal 0.1.0";

struct DatasetConfig {
    std::string kind = "synthetic";  // synthetic | idx
    int classes = 8;
    int samples_per_class = 400;
    int image_size = 12;
    double difficulty = 0.85;
    std::uint64_t seed = 7;
    std::string images_path, labels_path;  // idx
};

struct ExperimentConfig {
    std::uint64_t master_seed = 1;
    std::string network = "desk";  // desk | femnist
    DatasetConfig dataset;

    std::string partition_mode = "iid";  // iid | non_iid_shards
    int samples_per_device = 64;

    int devices = 20;
    int per_round = 5;
    int rounds = 200;
    int batch_size = 16;
    double lr = 0.035;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<std::uint64_t> seeds = {1, 2, 3};
    std::vector<std::string> techniques = {"distreal", "fedavg_full", "federated_dropout",
                                           "heterofl", "small_nn"};
    std::string lut_path = "lut.bin";

    double variability = 4.0;
    double lambda_rate = 0.0;  // resource changes per round; 0 = static
    double round_duration = 1.0;
    double training_factor = 2.0;

    double heterofl_s = 0.7;
    int heterofl_levels = 4;
    double small_nn_scale = 0.0;  // 0 = auto-fit to the lowest resource level

    int eval_samples = 512;
    DseParams dse;
    std::string dse_distortion = "rotate90";  // rotate90 | color_jitter_half

    std::string output_dir = "out";

    void validate() const;
};

std::string config_to_json(const ExperimentConfig& cfg);
ExperimentConfig config_from_json(const std::string& json_text);
ExperimentConfig load_config(const std::string& path);
void write_manifest(const ExperimentConfig& cfg, const std::string& path);

// Shared, seed-independent experiment inputs: network, datasets split into
// device pool / server test set / DSE validation / DSE training pool.
struct Environment {
    NetworkSpec net;
    NetworkSpec small_net;
    Dataset pool;
    Dataset test;
    Dataset validation;
    Dataset dse_pool;
};

Environment build_environment(const ExperimentConfig& cfg);

NetworkSpec network_from_config(const ExperimentConfig& cfg);

// Largest filter scale on a 0.05 grid whose full dense training fits the
// lowest calibrated resource level.
double auto_small_nn_scale(const NetworkSpec& net, double variability);

struct RoundRecord {
    int round = 0;
    double accuracy = 0.0;
    double total_macs = 0.0;  // sum of client-reported c this round
    int stragglers = 0;
    std::uint64_t theta_hash = 0;  // in-memory only, not part of the CSV schema
};

struct RunResult {
    Technique technique;
    std::uint64_t seed = 0;
    std::vector<RoundRecord> rounds;
    long long budget_fallbacks = 0;  // distreal diagnostics
    std::vector<double> final_theta;
};

std::uint64_t hash_doubles(const std::vector<double>& v);

RunResult run_experiment(const Environment& env, const ExperimentConfig& cfg,
                         Technique technique, std::uint64_t run_seed, const ParetoLUT* lut);

// Every configured (technique, seed) cell; cells run concurrently and are
// merged in configuration order.
std::vector<RunResult> run_all(const Environment& env, const ExperimentConfig& cfg,
                               const ParetoLUT* lut);

void write_convergence_csv(const std::vector<RunResult>& results, const std::string& path);
std::vector<RunResult> read_convergence_csv(const std::string& path);

struct DseArtifacts {
    DseResult result;
    std::vector<Individual> uniform_curve;  // measured uniform-rate reference
};

// Full design-time flow: snapshots, endpoint measurement, NSGA-II, uniform
// reference curve.
DseArtifacts run_dse(const Environment& env, const ExperimentConfig& cfg);

void write_generation_csv(const DseResult& result, const std::string& path);
void write_uniform_curve_csv(const std::vector<Individual>& curve, const std::string& path);

}  // namespace distreal
