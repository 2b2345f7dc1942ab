#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "distreal/data.hpp"
#include "distreal/engine.hpp"
#include "distreal/lut.hpp"
#include "distreal/network.hpp"
#include "distreal/resource_sim.hpp"

namespace distreal {

enum class Technique { distreal, fedavg_full, federated_dropout, heterofl, small_nn };

Technique technique_from_string(const std::string& s);
std::string technique_name(Technique t);

struct DeviceState {
    int id = 0;
    std::vector<int> data_idx;  // indices into the shared training pool
    ResourceTrace trace;
};

struct RoundUpdate {
    std::vector<double> delta;  // theta - theta_init, flat
    double c = 0.0;             // accumulated forward MACs (Alg. 1 units)
    int device = -1;
    bool straggler = false;
    int budget_fallbacks = 0;  // batches where even the smallest entry did not fit
};

struct ClientConfig {
    int batch_size = 16;
    double lr = 0.05;
    double momentum = 0.9;
    double weight_decay = 1e-4;
    double round_duration = 1.0;
    double training_factor = 2.0;
    double heterofl_s = 0.7;
    int heterofl_levels = 4;
};

// Algorithm-1 client: re-queries its resource level before every mini-batch,
// picks the max-fit LUT entry for the remaining per-batch budget, resamples
// masks, trains with inverted-dropout scaling. Never flags itself a
// straggler; infeasible budgets fall back to the smallest entry and are
// counted.
RoundUpdate client_train_distreal(const NetworkSpec& spec, const Weights& theta_init,
                                  const DeviceState& device, const Dataset& pool,
                                  const ParetoLUT& lut, int round_index,
                                  const ClientConfig& cfg, std::uint64_t run_seed);

// Theoretical upper-bound baseline: full model, resources ignored.
RoundUpdate client_train_fedavg(const NetworkSpec& spec, const Weights& theta_init,
                                const DeviceState& device, const Dataset& pool,
                                int round_index, const ClientConfig& cfg,
                                std::uint64_t run_seed);

// Server picks one uniform conv dropout rate at round start (smallest rate on
// a 0.01 grid whose expected training MACs fit the round budget); masks are
// sampled once per round and trained without scaling. Overtime flags the
// straggler bit.
RoundUpdate client_train_federated_dropout(const NetworkSpec& spec, const Weights& theta_init,
                                           const DeviceState& device, const Dataset& pool,
                                           int round_index, const ClientConfig& cfg,
                                           std::uint64_t run_seed);

// Width-shrunk prefix subnetworks: level p keeps the first
// ceil(s^(p-1) * c_out) filters of every conv layer; the server assigns the
// largest level that fits the round-start budget. No scaling; updates are
// restricted to the subnetwork.
RoundUpdate client_train_heterofl(const NetworkSpec& spec, const Weights& theta_init,
                                  const DeviceState& device, const Dataset& pool,
                                  int round_index, const ClientConfig& cfg,
                                  std::uint64_t run_seed);

// MAC-weighted averaging (Algorithm 2): theta_next = theta_prev +
// sum(c_i * delta_i) / sum(c_i) over non-stragglers, accumulated in ascending
// device id. Returns theta_prev unchanged when every update straggled.
std::vector<double> server_round(const std::vector<double>& theta_prev,
                                 const std::vector<RoundUpdate>& updates);

// Prefix masks of HeteroFL level p (1-based) under shrink ratio s.
MaskSet heterofl_prefix_masks(const NetworkSpec& spec, double s, int level);

// Smallest uniform rate on the grid {0, step, ..., 0.5} whose expected
// per-round training MACs fit `budget_macs`; nullopt when even 0.5 does not
// fit.
std::optional<double> uniform_rate_for_budget(const NetworkSpec& spec, double budget_macs,
                                              int batches, int batch_size,
                                              double training_factor, double step = 0.01);

}  // namespace distreal
