#include "distreal/fl.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "distreal/mac_model.hpp"
#include "distreal/rng.hpp"

namespace distreal {

Technique technique_from_string(const std::string& s) {
    if (s == "distreal") return Technique::distreal;
    if (s == "fedavg_full") return Technique::fedavg_full;
    if (s == "federated_dropout") return Technique::federated_dropout;
    if (s == "heterofl") return Technique::heterofl;
    if (s == "small_nn") return Technique::small_nn;
    throw std::invalid_argument("unknown technique: " + s);
}

std::string technique_name(Technique t) {
    switch (t) {
        case Technique::distreal: return "distreal";
        case Technique::fedavg_full: return "fedavg_full";
        case Technique::federated_dropout: return "federated_dropout";
        case Technique::heterofl: return "heterofl";
        case Technique::small_nn: return "small_nn";
    }
    return "?";
}

namespace {

struct LocalPass {
    std::vector<int> order;  // sample indices, shuffled for this round
    int batches = 0;
};

LocalPass plan_local_pass(const DeviceState& device, int batch_size, int round_index,
                          std::uint64_t run_seed) {
    LocalPass p;
    p.order = device.data_idx;
    Rng rng = make_rng(run_seed, Stream::batch_order,
                       {static_cast<std::uint64_t>(device.id),
                        static_cast<std::uint64_t>(round_index)});
    rng.shuffle(p.order);
    p.batches = (static_cast<int>(p.order.size()) + batch_size - 1) / batch_size;
    return p;
}

std::vector<double> delta_from(const Weights& theta, const Weights& theta_init) {
    std::vector<double> now, init;
    theta.to_flat(now);
    theta_init.to_flat(init);
    for (std::size_t i = 0; i < now.size(); ++i) now[i] -= init[i];
    return now;
}

Rng mask_rng(std::uint64_t run_seed, int device, int round, int batch) {
    return make_rng(run_seed, Stream::mask_sampling,
                    {static_cast<std::uint64_t>(device), static_cast<std::uint64_t>(round),
                     static_cast<std::uint64_t>(batch)});
}

void train_one_batch(const NetworkSpec& spec, Weights& w, const Dataset& pool,
                     const std::vector<int>& order, int begin, int end, const MaskSet& masks,
                     const ClientConfig& cfg, const ParamMask* restrict_to) {
    Tensor4 images;
    std::vector<int> labels;
    make_batch(pool, order, begin, end, images, labels);
    ForwardCache cache;
    forward(spec, w, images, &masks, true, &cache);
    Gradients g = backward(spec, w, cache, labels);
    sgd_step(spec, w, g, cfg.lr, cfg.momentum, cfg.weight_decay, restrict_to);
}

}  // namespace

RoundUpdate client_train_distreal(const NetworkSpec& spec, const Weights& theta_init,
                                  const DeviceState& device, const Dataset& pool,
                                  const ParetoLUT& lut, int round_index,
                                  const ClientConfig& cfg, std::uint64_t run_seed) {
    if (lut.fingerprint != spec.fingerprint())
        throw std::invalid_argument("distreal client: LUT fingerprint mismatch");

    const LocalPass pass = plan_local_pass(device, cfg.batch_size, round_index, run_seed);
    const double round_start = static_cast<double>(round_index) * cfg.round_duration;

    Weights theta = theta_init;
    theta.zero_momentum();
    RoundUpdate up;
    up.device = device.id;

    double elapsed = 0.0;
    for (int b = 0; b < pass.batches; ++b) {
        const int begin = b * cfg.batch_size;
        const int end = std::min<int>(begin + cfg.batch_size, static_cast<int>(pass.order.size()));
        const int n = end - begin;

        const double r = level_at(device.trace, round_start + elapsed);
        const double remaining = std::max(0.0, cfg.round_duration - elapsed);
        const double batch_budget = r * remaining / (pass.batches - b);
        bool fell_back = false;
        const LutEntry& entry = lookup(lut, batch_budget / n, cfg.training_factor, &fell_back);
        if (fell_back) ++up.budget_fallbacks;

        Rng mrng = mask_rng(run_seed, device.id, round_index, b);
        MaskSet masks = sample_masks(entry.d, spec, mrng);
        train_one_batch(spec, theta, pool, pass.order, begin, end, masks, cfg, nullptr);

        up.c += entry.expected_fwd_macs;
        elapsed += training_macs(entry.expected_fwd_macs, cfg.training_factor) * n / r;
    }
    up.delta = delta_from(theta, theta_init);
    return up;
}

RoundUpdate client_train_fedavg(const NetworkSpec& spec, const Weights& theta_init,
                                const DeviceState& device, const Dataset& pool,
                                int round_index, const ClientConfig& cfg,
                                std::uint64_t run_seed) {
    const LocalPass pass = plan_local_pass(device, cfg.batch_size, round_index, run_seed);
    const MaskSet full = MaskSet::full(spec);
    const double dense_fwd = network_expected_macs(
        spec, DropoutVector(static_cast<std::size_t>(spec.conv_count()), 0.0)).total;

    Weights theta = theta_init;
    theta.zero_momentum();
    RoundUpdate up;
    up.device = device.id;
    for (int b = 0; b < pass.batches; ++b) {
        const int begin = b * cfg.batch_size;
        const int end = std::min<int>(begin + cfg.batch_size, static_cast<int>(pass.order.size()));
        train_one_batch(spec, theta, pool, pass.order, begin, end, full, cfg, nullptr);
        up.c += dense_fwd;
    }
    up.delta = delta_from(theta, theta_init);
    return up;
}

std::optional<double> uniform_rate_for_budget(const NetworkSpec& spec, double budget_macs,
                                              int batches, int batch_size,
                                              double training_factor, double step) {
    const std::size_t k = static_cast<std::size_t>(spec.conv_count());
    const double limit = budget_macs * (1.0 + 1e-12);
    for (double rate = 0.0; rate <= 0.5 + 1e-12; rate += step) {
        const double r = std::min(rate, 0.5);
        const double cost =
            training_macs(network_expected_macs(spec, DropoutVector(k, r)).total,
                          training_factor) *
            batch_size * batches;
        if (cost <= limit) return r;
    }
    return std::nullopt;
}

RoundUpdate client_train_federated_dropout(const NetworkSpec& spec, const Weights& theta_init,
                                           const DeviceState& device, const Dataset& pool,
                                           int round_index, const ClientConfig& cfg,
                                           std::uint64_t run_seed) {
    const LocalPass pass = plan_local_pass(device, cfg.batch_size, round_index, run_seed);
    const double round_start = static_cast<double>(round_index) * cfg.round_duration;

    // rate fixed by the server from the resource level at round start
    const double r0 = level_at(device.trace, round_start);
    const auto rate = uniform_rate_for_budget(spec, r0 * cfg.round_duration, pass.batches,
                                              cfg.batch_size, cfg.training_factor);
    const double u = rate.value_or(0.5);  // best effort when nothing fits

    // one mask sample for the whole round, trained through the same dropout
    // machinery as the adaptive technique (rates uniform across layers)
    Rng mrng = mask_rng(run_seed, device.id, round_index, 0);
    MaskSet masks =
        sample_masks(DropoutVector(static_cast<std::size_t>(spec.conv_count()), u), spec, mrng);
    const double fwd = network_expected_macs(
        spec, DropoutVector(static_cast<std::size_t>(spec.conv_count()), u)).total;

    Weights theta = theta_init;
    theta.zero_momentum();
    RoundUpdate up;
    up.device = device.id;
    double elapsed = 0.0;
    for (int b = 0; b < pass.batches; ++b) {
        const int begin = b * cfg.batch_size;
        const int end = std::min<int>(begin + cfg.batch_size, static_cast<int>(pass.order.size()));
        const int n = end - begin;
        const double r = level_at(device.trace, round_start + std::min(elapsed, cfg.round_duration));
        train_one_batch(spec, theta, pool, pass.order, begin, end, masks, cfg, nullptr);
        up.c += fwd;
        elapsed += training_macs(fwd, cfg.training_factor) * n / r;
    }
    up.straggler = elapsed > cfg.round_duration * (1.0 + 1e-9);
    up.delta = delta_from(theta, theta_init);
    return up;
}

MaskSet heterofl_prefix_masks(const NetworkSpec& spec, double s, int level) {
    MaskSet m;
    const double frac = std::pow(s, level - 1);
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::conv) continue;
        LayerMask lm;
        lm.rate = 0.0;
        const int keep = std::max(1, static_cast<int>(std::ceil(frac * l.c_out)));
        for (int f = 0; f < keep; ++f) lm.kept.push_back(f);
        m.conv_masks.push_back(std::move(lm));
    }
    return m;
}

RoundUpdate client_train_heterofl(const NetworkSpec& spec, const Weights& theta_init,
                                  const DeviceState& device, const Dataset& pool,
                                  int round_index, const ClientConfig& cfg,
                                  std::uint64_t run_seed) {
    const LocalPass pass = plan_local_pass(device, cfg.batch_size, round_index, run_seed);
    const double round_start = static_cast<double>(round_index) * cfg.round_duration;
    const double r0 = level_at(device.trace, round_start);
    const double limit = r0 * cfg.round_duration * (1.0 + 1e-12);

    RoundUpdate up;
    up.device = device.id;

    // largest subnetwork (smallest level index) that fits the round budget
    int level = -1;
    MaskSet masks;
    double fwd = 0.0;
    for (int p = 1; p <= cfg.heterofl_levels; ++p) {
        MaskSet cand = heterofl_prefix_masks(spec, cfg.heterofl_s, p);
        const double f = realized_macs(spec, cand);
        const double cost = training_macs(f, cfg.training_factor) * cfg.batch_size *
                            pass.batches;
        if (cost <= limit) {
            level = p;
            masks = std::move(cand);
            fwd = f;
            break;
        }
    }
    if (level < 0) {
        // not even the smallest level fits
        up.straggler = true;
        up.delta.assign(theta_init.param_count(), 0.0);
        return up;
    }

    const ParamMask restrict_to = subnet_param_mask(spec, masks);
    Weights theta = theta_init;
    theta.zero_momentum();
    double elapsed = 0.0;
    for (int b = 0; b < pass.batches; ++b) {
        const int begin = b * cfg.batch_size;
        const int end = std::min<int>(begin + cfg.batch_size, static_cast<int>(pass.order.size()));
        const int n = end - begin;
        const double r = level_at(device.trace, round_start + std::min(elapsed, cfg.round_duration));
        train_one_batch(spec, theta, pool, pass.order, begin, end, masks, cfg, &restrict_to);
        up.c += fwd;
        elapsed += training_macs(fwd, cfg.training_factor) * n / r;
    }
    up.straggler = elapsed > cfg.round_duration * (1.0 + 1e-9);
    up.delta = delta_from(theta, theta_init);
    return up;
}

std::vector<double> server_round(const std::vector<double>& theta_prev,
                                 const std::vector<RoundUpdate>& updates) {
    std::vector<const RoundUpdate*> active;
    for (const auto& u : updates)
        if (!u.straggler) active.push_back(&u);
    if (active.empty()) return theta_prev;

    std::sort(active.begin(), active.end(),
              [](const RoundUpdate* a, const RoundUpdate* b) { return a->device < b->device; });

    double total_c = 0.0;
    for (const auto* u : active) total_c += u->c;
    if (!(total_c > 0.0))
        throw std::logic_error("server_round: zero computation weight with updates present");

    std::vector<double> acc(theta_prev.size(), 0.0);
    for (const auto* u : active) {
        if (u->delta.size() != theta_prev.size())
            throw std::invalid_argument("server_round: delta size mismatch");
        for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += u->c * u->delta[i];
    }
    std::vector<double> next = theta_prev;
    for (std::size_t i = 0; i < next.size(); ++i) next[i] += acc[i] / total_c;
    return next;
}

}  // namespace distreal
