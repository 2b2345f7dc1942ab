#include "distreal/network.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace distreal {

int NetworkSpec::conv_count() const {
    int n = 0;
    for (const auto& l : layers)
        if (l.kind == LayerKind::conv) ++n;
    return n;
}

std::vector<Dims> NetworkSpec::chain_dims() const {
    std::vector<Dims> out;
    out.reserve(layers.size());
    Dims d{input_dims[0], input_dims[1], input_dims[2]};
    for (const auto& l : layers) {
        switch (l.kind) {
            case LayerKind::conv: {
                int h = (d.h + 2 * l.padding - l.k_h) / l.stride + 1;
                int w = (d.w + 2 * l.padding - l.k_w) / l.stride + 1;
                if (h < 1 || w < 1) throw std::invalid_argument("conv output dims < 1");
                d = Dims{l.c_out, h, w};
                break;
            }
            case LayerKind::max_pool: {
                int h = (d.h - l.pool_k) / l.pool_stride + 1;
                int w = (d.w - l.pool_k) / l.pool_stride + 1;
                if (h < 1 || w < 1) throw std::invalid_argument("pool output dims < 1");
                d = Dims{d.c, h, w};
                break;
            }
            case LayerKind::relu:
            case LayerKind::sparse_begin:
            case LayerKind::sparse_end:
                break;
            case LayerKind::flatten:
                d = Dims{d.c * d.h * d.w, 1, 1};
                break;
            case LayerKind::dense:
                if (d.h != 1 || d.w != 1)
                    throw std::invalid_argument("dense layer requires flattened input");
                d = Dims{l.n_out, 1, 1};
                break;
        }
        out.push_back(d);
    }
    return out;
}

Dims NetworkSpec::output_dims() const {
    auto dims = chain_dims();
    if (dims.empty()) return Dims{input_dims[0], input_dims[1], input_dims[2]};
    return dims.back();
}

void NetworkSpec::validate() const {
    chain_dims();  // throws on inconsistent dims
    if (conv_count() == 0) return;

    int begin_at = -1, end_at = -1, first_conv = -1, last_conv = -1, first_dense = -1,
        first_flatten = -1;
    for (int i = 0; i < static_cast<int>(layers.size()); ++i) {
        switch (layers[i].kind) {
            case LayerKind::sparse_begin:
                if (begin_at >= 0) throw std::invalid_argument("duplicate sparse_begin");
                begin_at = i;
                break;
            case LayerKind::sparse_end:
                if (end_at >= 0) throw std::invalid_argument("duplicate sparse_end");
                end_at = i;
                break;
            case LayerKind::conv:
                if (first_conv < 0) first_conv = i;
                last_conv = i;
                break;
            case LayerKind::dense:
                if (first_dense < 0) first_dense = i;
                break;
            case LayerKind::flatten:
                if (first_flatten < 0) first_flatten = i;
                break;
            default:
                break;
        }
    }
    if (begin_at < 0 || end_at < 0)
        throw std::invalid_argument("conv network requires sparse_begin/sparse_end markers");
    if (begin_at > first_conv)
        throw std::invalid_argument("sparse_begin must precede the first conv layer");
    if (end_at < last_conv) throw std::invalid_argument("sparse_end must follow the last conv layer");
    if (first_dense >= 0 && end_at > first_dense)
        throw std::invalid_argument("sparse_end must precede the first dense layer");
    if (first_flatten >= 0 && first_flatten < end_at)
        throw std::invalid_argument("flatten must come after sparse_end");
}

std::uint64_t NetworkSpec::fingerprint() const {
    // FNV-1a over a canonical integer encoding of the topology.
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xff;
            h *= 0x100000001b3ULL;
        }
    };
    for (int d : input_dims) mix(static_cast<std::uint64_t>(d));
    for (const auto& l : layers) {
        mix(static_cast<std::uint64_t>(l.kind));
        mix(static_cast<std::uint64_t>(l.c_out));
        mix(static_cast<std::uint64_t>(l.k_w));
        mix(static_cast<std::uint64_t>(l.k_h));
        mix(static_cast<std::uint64_t>(l.stride));
        mix(static_cast<std::uint64_t>(l.padding));
        mix(l.has_bias ? 1 : 0);
        mix(static_cast<std::uint64_t>(l.pool_k));
        mix(static_cast<std::uint64_t>(l.pool_stride));
        mix(static_cast<std::uint64_t>(l.n_out));
    }
    return h;
}

std::vector<int> NetworkSpec::prev_conv_index() const {
    std::vector<int> out(layers.size(), -1);
    int cur = -1;  // conv ordinal whose channel structure the next layer sees
    int conv_ord = 0;
    for (std::size_t i = 0; i < layers.size(); ++i) {
        out[i] = cur;
        if (layers[i].kind == LayerKind::conv) cur = conv_ord++;
        if (layers[i].kind == LayerKind::sparse_end) cur = -1;
    }
    return out;
}

namespace {

void shape_params(const NetworkSpec& spec, std::vector<LayerParams>& params) {
    auto dims = spec.chain_dims();
    params.resize(spec.layers.size());
    Dims in{spec.input_dims[0], spec.input_dims[1], spec.input_dims[2]};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const Layer& l = spec.layers[i];
        if (l.kind == LayerKind::conv) {
            params[i].w.assign(
                static_cast<std::size_t>(l.c_out) * in.c * l.k_h * l.k_w, 0.0);
            if (l.has_bias) params[i].b.assign(static_cast<std::size_t>(l.c_out), 0.0);
        } else if (l.kind == LayerKind::dense) {
            params[i].w.assign(static_cast<std::size_t>(l.n_out) * in.c, 0.0);
            if (l.has_bias) params[i].b.assign(static_cast<std::size_t>(l.n_out), 0.0);
        }
        in = dims[i];
    }
}

}  // namespace

Weights Weights::init(const NetworkSpec& spec, Rng& rng) {
    Weights w = zeros_like(spec);
    auto dims = spec.chain_dims();
    Dims in{spec.input_dims[0], spec.input_dims[1], spec.input_dims[2]};
    for (std::size_t i = 0; i < spec.layers.size(); ++i) {
        const Layer& l = spec.layers[i];
        if (l.kind == LayerKind::conv || l.kind == LayerKind::dense) {
            std::size_t fan_in = l.kind == LayerKind::conv
                                     ? static_cast<std::size_t>(in.c) * l.k_h * l.k_w
                                     : static_cast<std::size_t>(in.c);
            double sd = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (double& v : w.params[i].w) v = sd * rng.normal();
            // biases stay zero
        }
        in = dims[i];
    }
    return w;
}

Weights Weights::zeros_like(const NetworkSpec& spec) {
    Weights w;
    shape_params(spec, w.params);
    shape_params(spec, w.momentum);
    return w;
}

std::size_t Weights::param_count() const {
    std::size_t n = 0;
    for (const auto& p : params) n += p.w.size() + p.b.size();
    return n;
}

void Weights::to_flat(std::vector<double>& out) const {
    out.clear();
    out.reserve(param_count());
    for (const auto& p : params) {
        out.insert(out.end(), p.w.begin(), p.w.end());
        out.insert(out.end(), p.b.begin(), p.b.end());
    }
}

void Weights::from_flat(const std::vector<double>& flat) {
    std::size_t k = 0;
    for (auto& p : params) {
        std::copy(flat.begin() + k, flat.begin() + k + p.w.size(), p.w.begin());
        k += p.w.size();
        std::copy(flat.begin() + k, flat.begin() + k + p.b.size(), p.b.begin());
        k += p.b.size();
    }
}

void Weights::zero_momentum() {
    for (auto& p : momentum) {
        std::fill(p.w.begin(), p.w.end(), 0.0);
        std::fill(p.b.begin(), p.b.end(), 0.0);
    }
}

Gradients Gradients::zeros_like(const NetworkSpec& spec) {
    Gradients g;
    shape_params(spec, g.params);
    return g;
}

MaskSet MaskSet::full(const NetworkSpec& spec) {
    MaskSet m;
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::conv) continue;
        LayerMask lm;
        lm.rate = 0.0;
        lm.kept.resize(static_cast<std::size_t>(l.c_out));
        for (int i = 0; i < l.c_out; ++i) lm.kept[static_cast<std::size_t>(i)] = i;
        m.conv_masks.push_back(std::move(lm));
    }
    return m;
}

NetworkSpec femnist_network() {
    NetworkSpec s;
    s.input_dims = {1, 28, 28};
    s.layers = {
        Layer::SparseBegin(),
        Layer::Conv(32, 5, 5),
        Layer::ReLU(),
        Layer::MaxPool(2, 2),
        Layer::Conv(64, 5, 5),
        Layer::ReLU(),
        Layer::MaxPool(2, 2),
        Layer::SparseEnd(),
        Layer::Flatten(),
        Layer::Dense(512),
        Layer::ReLU(),
        Layer::Dense(62),
    };
    s.validate();
    return s;
}

NetworkSpec desk_network(int classes, int image_size) {
    // five conv layers with deliberately uneven costs, so per-layer rates
    // have room to beat a uniform rate
    NetworkSpec s;
    s.input_dims = {1, image_size, image_size};
    s.layers = {
        Layer::SparseBegin(),
        Layer::Conv(8, 3, 3),
        Layer::ReLU(),
        Layer::Conv(16, 3, 3),
        Layer::ReLU(),
        Layer::Conv(16, 1, 1),
        Layer::ReLU(),
        Layer::MaxPool(2, 2),
        Layer::Conv(24, 3, 3),
        Layer::ReLU(),
        Layer::Conv(16, 1, 1),
        Layer::ReLU(),
        Layer::SparseEnd(),
        Layer::Flatten(),
        Layer::Dense(classes),
    };
    s.validate();
    return s;
}

NetworkSpec scale_filters(const NetworkSpec& spec, double filter_scale) {
    NetworkSpec s = spec;
    for (auto& l : s.layers) {
        if (l.kind != LayerKind::conv) continue;
        l.c_out = std::max(1, static_cast<int>(std::floor(l.c_out * filter_scale)));
    }
    s.validate();
    return s;
}

}  // namespace distreal
