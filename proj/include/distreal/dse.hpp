#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <utility>
#include <vector>

#include "distreal/data.hpp"
#include "distreal/lut.hpp"
#include "distreal/network.hpp"
#include "distreal/rng.hpp"

namespace distreal {

struct Individual {
    DropoutVector d;
    double macs = 0.0;       // expected forward MACs
    double delta_acc = 0.0;  // mean accuracy change over the seeds
    double f1 = 0.0, f2 = 0.0;
};

struct DseParams {
    int population = 64;
    int generations = 20;
    double crossover_prob = 0.95, crossover_eta = 10.0;
    double mutation_prob = 0.01, mutation_eta = 50.0;
    double rate_lo = 0.0, rate_hi = 0.5;
    // desk-scale defaults; the paper-scale protocol (64 batches of 64,
    // lr 0.005 on the FEMNIST network) stays reachable through config
    int short_train_batches = 24;
    int short_train_batch_size = 16;
    double short_train_lr = 0.02;
    int pretrain_steps = 150;
    int pretrain_batch_size = 16;
    double pretrain_lr = 0.02;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    std::vector<std::uint64_t> seeds = {11, 12, 13};
    int validation_samples = 1024;
};

// Snapshot weights, endpoint objective values, and the data the short
// trainings draw from. Built once before the search starts.
struct FitnessContext {
    NetworkSpec spec;
    DseParams params;
    Dataset train;       // clean pool the short trainings sample from
    Dataset validation;  // held-out, evaluated with the full model
    std::vector<Weights> snapshots;    // one per seed
    std::vector<double> snapshot_acc;  // validation accuracy of each snapshot
    double macs_zero = 0.0, macs_half = 0.0;
    double dacc_zero = 0.0, dacc_half = 0.0;
};

// Partially trains the network on the distorted dataset; the result seeds
// every fitness evaluation of the run.
Weights pretrain_snapshot(const NetworkSpec& spec, const Dataset& distorted,
                          const DseParams& params, std::uint64_t seed);

// Validation-accuracy change after the configured short training from a copy
// of the snapshot, with dropout vector d.
double short_train_delta_acc(const FitnessContext& ctx, const DropoutVector& d,
                             int seed_index);

// Builds context incl. endpoint measurements; aborts on a degenerate
// endpoint gap (< 1e-4).
FitnessContext make_fitness_context(const NetworkSpec& spec, const Dataset& clean_train,
                                    const Dataset& validation, const Dataset& distorted,
                                    const DseParams& params);

// Normalized two-objective fitness, both minimized. Also reports the raw
// (MACs, delta-acc) pair.
std::pair<double, double> fitness(const FitnessContext& ctx, const DropoutVector& d,
                                  double* macs_out = nullptr, double* dacc_out = nullptr);

// Standard Pareto ranking for minimization; fronts hold indices into points.
std::vector<std::vector<int>> fast_non_dominated_sort(
    const std::vector<std::pair<double, double>>& points);

// NSGA-II crowding distance for one front; boundary points get +inf.
std::vector<double> crowding_distance(const std::vector<std::pair<double, double>>& front);

void sbx_crossover(const DropoutVector& parent_a, const DropoutVector& parent_b, double prob,
                   double eta, double lo, double hi, Rng& rng, DropoutVector& child_a,
                   DropoutVector& child_b);

void polynomial_mutation(DropoutVector& genes, double prob, double eta, double lo, double hi,
                         Rng& rng);

// Hypervolume of the non-dominated subset w.r.t. a reference point
// (inclusion-exclusion on the 2-D staircase).
double hypervolume_2d(const std::vector<std::pair<double, double>>& points, double ref_f1 = 1.1,
                      double ref_f2 = 1.1);

struct DseResult {
    std::vector<std::vector<Individual>> generations;  // population after each generation
    // Non-dominated set over everything evaluated so far, and its hypervolume
    // (ref 1.1/1.1) after each generation; monotone by construction.
    std::vector<Individual> archive;
    std::vector<double> front_hypervolume;
    ParetoLUT lut;
};

// Generational NSGA-II: binary tournament on (rank, crowding, index), SBX,
// polynomial mutation, elitist environmental selection. Deterministic given
// the master seed. `eval_fn` defaults to fitness() against ctx and is
// injectable for surrogate objectives in tests.
using FitnessFn =
    std::function<std::pair<double, double>(const DropoutVector&, double*, double*)>;

DseResult nsga2_run(const FitnessContext& ctx, std::uint64_t master_seed);
DseResult nsga2_run_custom(int genes, const DseParams& params, std::uint64_t master_seed,
                           const FitnessFn& eval_fn, std::uint64_t lut_fingerprint);

// Rank-0 individuals, deduplicated by objective value, ascending by MACs.
// Rates are quantized to 32-bit floats (the LUT's storage width) and the
// MACs recomputed so the table round-trips exactly.
ParetoLUT extract_pareto_lut(const std::vector<Individual>& population,
                             const NetworkSpec* spec_for_macs, std::uint64_t fingerprint);

}  // namespace distreal
