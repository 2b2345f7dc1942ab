#include "distreal/resource_sim.hpp"

#include <cstdio>
#include <fstream>
#include <stdexcept>

#include "distreal/mac_model.hpp"

namespace distreal {

ResourceTrace generate_trace(double lambda, double low, double high, double horizon_rounds,
                             Rng& rng) {
    if (lambda < 0) throw std::invalid_argument("generate_trace: lambda must be >= 0");
    if (!(low > 0) || low > high) throw std::invalid_argument("generate_trace: invalid range");

    ResourceTrace trace;
    trace.lambda = lambda;
    trace.low = low;
    trace.high = high;
    trace.events.push_back({0.0, rng.uniform(low, high)});
    if (lambda == 0.0) return trace;

    double t = 0.0;
    while (true) {
        t += rng.exponential(lambda);
        if (t > horizon_rounds) break;
        trace.events.push_back({t, rng.uniform(low, high)});
    }
    return trace;
}

double level_at(const ResourceTrace& trace, double t) {
    if (t < 0) throw std::invalid_argument("level_at: negative time");
    // latest event with time <= t
    int lo = 0, hi = static_cast<int>(trace.events.size()) - 1, best = 0;
    while (lo <= hi) {
        const int mid = (lo + hi) / 2;
        if (trace.events[static_cast<std::size_t>(mid)].time <= t) {
            best = mid;
            lo = mid + 1;
        } else {
            hi = mid - 1;
        }
    }
    return trace.events[static_cast<std::size_t>(best)].level;
}

std::pair<double, double> calibrate_range(const NetworkSpec& spec, double variability,
                                          int local_batches, int batch_size,
                                          double round_duration, double training_factor) {
    if (variability < 1.0) throw std::invalid_argument("calibrate_range: variability must be >= 1");
    const DropoutVector zeros(static_cast<std::size_t>(spec.conv_count()), 0.0);
    const double per_batch =
        training_macs(network_expected_macs(spec, zeros).total, training_factor) * batch_size;
    const double high = per_batch * local_batches / round_duration;
    return {high / variability, high};
}

void export_traces_csv(const std::vector<ResourceTrace>& traces, const std::string& path) {
    std::ofstream os(path);
    if (!os) throw std::runtime_error("trace export: cannot write " + path);
    os << "#schema trace 1\n";
    os << "device,time,level\n";
    char buf[64];
    for (std::size_t dev = 0; dev < traces.size(); ++dev) {
        for (const auto& ev : traces[dev].events) {
            os << dev;
            std::snprintf(buf, sizeof buf, "%.17g", ev.time);
            os << "," << buf;
            std::snprintf(buf, sizeof buf, "%.17g", ev.level);
            os << "," << buf << "\n";
        }
    }
}

}  // namespace distreal
