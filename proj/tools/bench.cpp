// Compares the serial dense reference against the OpenMP sparse engine for
// forward+backward steps at several dropout levels and thread counts.
#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <functional>
#include <omp.h>
#include <vector>

#include "distreal/engine.hpp"
#include "distreal/mac_model.hpp"

using namespace distreal;
using Clock = std::chrono::steady_clock;

namespace {

double time_ms(int iters, const std::function<void()>& fn) {
    fn();  // warmup
    const auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i) fn();
    const auto t1 = Clock::now();
    return std::chrono::duration<double, std::milli>(t1 - t0).count() / iters;
}

}  // namespace

int main(int argc, char** argv) {
    const int batch = argc > 1 ? std::atoi(argv[1]) : 64;
    const int iters = argc > 2 ? std::atoi(argv[2]) : 20;

    NetworkSpec net = femnist_network();
    Rng wrng(1), xrng(2);
    Weights w = Weights::init(net, wrng);
    Tensor4 x(batch, net.input_dims[0], net.input_dims[1], net.input_dims[2]);
    for (auto& v : x.data) v = xrng.u01();
    std::vector<int> y(batch);
    for (auto& l : y) l = static_cast<int>(xrng.uniform_int(62));

    std::printf("network: femnist-style CNN, batch %d, %d iters per cell\n", batch, iters);
    std::printf("%-28s %-10s %12s %10s\n", "kernel", "threads", "ms/step", "speedup");

    const double serial_ms = time_ms(iters, [&] {
        ForwardCache cache;
        reference::forward(net, w, x, &cache);
        reference::backward(net, w, cache, y);
    });
    std::printf("%-28s %-10s %12.2f %10s\n", "reference (serial dense)", "1", serial_ms, "1.00x");

    const int max_threads = omp_get_max_threads();
    for (double rate : {0.0, 0.25, 0.5}) {
        DropoutVector d(static_cast<std::size_t>(net.conv_count()), rate);
        for (int threads : {1, max_threads}) {
            if (threads == 1 && max_threads == 1 && rate != 0.0) continue;
            omp_set_num_threads(threads);
            Rng mrng(3);
            const double ms = time_ms(iters, [&] {
                MaskSet masks = sample_masks(d, net, mrng);
                ForwardCache cache;
                forward(net, w, x, &masks, true, &cache);
                backward(net, w, cache, y);
            });
            char label[64];
            std::snprintf(label, sizeof label, "sparse engine (d=%.2f)", rate);
            std::printf("%-28s %-10d %12.2f %9.2fx\n", label, threads, ms, serial_ms / ms);
        }
    }
    omp_set_num_threads(max_threads);
    return 0;
}
