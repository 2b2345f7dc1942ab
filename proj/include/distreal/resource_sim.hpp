#pragma once

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "distreal/network.hpp"
#include "distreal/rng.hpp"

namespace distreal {

struct TraceEvent {
    double time;   // in rounds
    double level;  // MACs per round
};

// Piecewise-constant, right-continuous resource availability. First event at
// t = 0; levels are uniform in [low, high]; inter-event gaps are
// Exponential(lambda). lambda = 0 means a single static level.
struct ResourceTrace {
    std::vector<TraceEvent> events;
    double lambda = 0.0;
    double low = 0.0, high = 0.0;
};

ResourceTrace generate_trace(double lambda, double low, double high, double horizon_rounds,
                             Rng& rng);

double level_at(const ResourceTrace& trace, double t);

// high = training MACs of the full network per batch * local_batches /
// round_duration, so a device at `high` trains the d = 0 vector in exactly
// one round; low = high / variability.
std::pair<double, double> calibrate_range(const NetworkSpec& spec, double variability,
                                          int local_batches, int batch_size,
                                          double round_duration, double training_factor = 2.0);

void export_traces_csv(const std::vector<ResourceTrace>& traces, const std::string& path);

}  // namespace distreal
