#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "distreal/rng.hpp"

namespace distreal {

enum class LayerKind { conv, max_pool, relu, flatten, dense, sparse_begin, sparse_end };

struct Layer {
    LayerKind kind;
    // conv
    int c_out = 0, k_w = 0, k_h = 0, stride = 1, padding = 0;
    bool has_bias = true;
    // max_pool
    int pool_k = 0, pool_stride = 0;
    // dense
    int n_out = 0;

    static Layer Conv(int c_out, int k_w, int k_h, int stride = 1, int padding = 0,
                      bool has_bias = true) {
        Layer l{LayerKind::conv};
        l.c_out = c_out;
        l.k_w = k_w;
        l.k_h = k_h;
        l.stride = stride;
        l.padding = padding;
        l.has_bias = has_bias;
        return l;
    }
    static Layer MaxPool(int k, int stride) {
        Layer l{LayerKind::max_pool};
        l.pool_k = k;
        l.pool_stride = stride;
        return l;
    }
    static Layer ReLU() { return Layer{LayerKind::relu}; }
    static Layer Flatten() { return Layer{LayerKind::flatten}; }
    static Layer Dense(int n_out, bool has_bias = true) {
        Layer l{LayerKind::dense};
        l.n_out = n_out;
        l.has_bias = has_bias;
        return l;
    }
    static Layer SparseBegin() { return Layer{LayerKind::sparse_begin}; }
    static Layer SparseEnd() { return Layer{LayerKind::sparse_end}; }
};

struct Dims {
    int c = 0, h = 0, w = 0;  // h == w == 1 after flatten
};

// Ordered layer descriptions defining the topology. Networks with
// convolutional layers delimit the channel-sparse region with
// sparse_begin/sparse_end markers.
struct NetworkSpec {
    std::array<int, 3> input_dims{};  // (c, h, w)
    std::vector<Layer> layers;

    int conv_count() const;
    // Output dims after each layer (index i = dims after layers[i]).
    std::vector<Dims> chain_dims() const;  // throws on inconsistent chains
    Dims output_dims() const;
    void validate() const;  // marker placement + dim chaining
    std::uint64_t fingerprint() const;

    // Index of the conv layer (0-based among convs) feeding each layer's
    // input channels, or -1 when the input is not a sparse conv output.
    std::vector<int> prev_conv_index() const;
};

// One dropout rate per conv layer, each in [0, 0.5].
using DropoutVector = std::vector<double>;

struct LayerParams {
    std::vector<double> w;  // conv: (c_out, c_in, k_h, k_w); dense: (n_out, n_in)
    std::vector<double> b;  // empty when has_bias == false
};

// Per-layer weights plus SGD momentum buffers of identical shape.
struct Weights {
    std::vector<LayerParams> params;    // entry per layer (empty for non-parametric)
    std::vector<LayerParams> momentum;  // same shapes, zero-initialized

    static Weights init(const NetworkSpec& spec, Rng& rng);  // He-normal
    static Weights zeros_like(const NetworkSpec& spec);

    std::size_t param_count() const;
    void to_flat(std::vector<double>& out) const;       // weights only, fixed order
    void from_flat(const std::vector<double>& flat);    // weights only
    void zero_momentum();
};

// Gradients mirror the weight shapes (no momentum).
struct Gradients {
    std::vector<LayerParams> params;

    static Gradients zeros_like(const NetworkSpec& spec);
};

// Realized valid-filter indices per conv layer, with the rate they were
// sampled at (needed for the 1/(1-d) training scale).
struct LayerMask {
    std::vector<int> kept;  // strictly increasing, non-empty
    double rate = 0.0;
};

struct MaskSet {
    std::vector<LayerMask> conv_masks;  // one per conv layer, in network order

    static MaskSet full(const NetworkSpec& spec);
};

NetworkSpec femnist_network();
// Small 3-conv network used for desk-scale experiments.
NetworkSpec desk_network(int classes, int image_size);
// Same topology with conv filter counts scaled by `filter_scale` (floor, min 1).
NetworkSpec scale_filters(const NetworkSpec& spec, double filter_scale);

}  // namespace distreal
