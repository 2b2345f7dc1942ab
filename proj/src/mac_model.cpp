#include "distreal/mac_model.hpp"

#include <stdexcept>

namespace distreal {

double conv_expected_macs(double d, double d_prev, double out_values, double c_in, double k_w,
                          double k_h, bool bias) {
    if (out_values < 0 || c_in < 0 || k_w < 0 || k_h < 0)
        throw std::invalid_argument("conv_expected_macs: negative dims");
    if (!(d >= 0.0 && d <= 0.5) || !(d_prev >= 0.0 && d_prev <= 0.5))
        throw std::invalid_argument("conv_expected_macs: rate outside [0, 0.5]");
    return (1.0 - d) * out_values * ((1.0 - d_prev) * c_in * k_w * k_h + (bias ? 1.0 : 0.0));
}

double elementwise_expected_macs(double d_prev, double dense_macs) {
    if (!(d_prev >= 0.0 && d_prev <= 0.5))
        throw std::invalid_argument("elementwise_expected_macs: rate outside [0, 0.5]");
    if (dense_macs < 0) throw std::invalid_argument("elementwise_expected_macs: negative cost");
    return (1.0 - d_prev) * dense_macs;
}

MacBreakdown network_expected_macs(const NetworkSpec& spec, const DropoutVector& d) {
    if (static_cast<int>(d.size()) != spec.conv_count())
        throw std::invalid_argument("network_expected_macs: rate count != conv count");

    MacBreakdown out;
    out.per_layer.assign(spec.layers.size(), 0.0);
    auto dims = spec.chain_dims();
    Dims in{spec.input_dims[0], spec.input_dims[1], spec.input_dims[2]};

    double d_prev = 0.0;  // rate governing the current activation's channels
    std::size_t conv_ord = 0;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const Layer& l = spec.layers[li];
        double macs = 0.0;
        switch (l.kind) {
            case LayerKind::conv: {
                const Dims& o = dims[li];
                macs = conv_expected_macs(d[conv_ord], d_prev,
                                          static_cast<double>(o.c) * o.h * o.w, in.c, l.k_w,
                                          l.k_h, l.has_bias);
                d_prev = d[conv_ord++];
                break;
            }
            case LayerKind::relu:
                macs = elementwise_expected_macs(d_prev,
                                                 static_cast<double>(in.c) * in.h * in.w);
                break;
            case LayerKind::max_pool: {
                // one MAC per input element of each pooled window
                const Dims& o = dims[li];
                macs = elementwise_expected_macs(
                    d_prev, static_cast<double>(o.c) * o.h * o.w * l.pool_k * l.pool_k);
                break;
            }
            case LayerKind::dense:
                macs = static_cast<double>(in.c) * l.n_out + (l.has_bias ? l.n_out : 0.0);
                break;
            case LayerKind::sparse_end:
                d_prev = 0.0;  // zero-filled back to the full channel count
                break;
            case LayerKind::sparse_begin:
            case LayerKind::flatten:
                break;
        }
        out.per_layer[li] = macs;
        out.total += macs;
        in = dims[li];
    }
    return out;
}

double realized_macs(const NetworkSpec& spec, const MaskSet& masks) {
    if (static_cast<int>(masks.conv_masks.size()) != spec.conv_count())
        throw std::invalid_argument("realized_macs: mask count != conv count");

    auto dims = spec.chain_dims();
    Dims in{spec.input_dims[0], spec.input_dims[1], spec.input_dims[2]};
    double total = 0.0;
    double valid_frac = 1.0;  // fraction of surviving channels in the activation
    std::size_t conv_ord = 0;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const Layer& l = spec.layers[li];
        switch (l.kind) {
            case LayerKind::conv: {
                const Dims& o = dims[li];
                const double n_in = valid_frac * in.c;
                const double n_out =
                    static_cast<double>(masks.conv_masks[conv_ord].kept.size());
                total += n_out * o.h * o.w * (n_in * l.k_w * l.k_h + (l.has_bias ? 1.0 : 0.0));
                valid_frac = n_out / l.c_out;
                ++conv_ord;
                break;
            }
            case LayerKind::relu:
                total += valid_frac * in.c * in.h * in.w;
                break;
            case LayerKind::max_pool: {
                const Dims& o = dims[li];
                total += valid_frac * o.c * o.h * o.w * l.pool_k * l.pool_k;
                break;
            }
            case LayerKind::dense:
                total += static_cast<double>(in.c) * l.n_out + (l.has_bias ? l.n_out : 0.0);
                break;
            case LayerKind::sparse_end:
                valid_frac = 1.0;
                break;
            case LayerKind::sparse_begin:
            case LayerKind::flatten:
                break;
        }
        in = dims[li];
    }
    return total;
}

double training_macs(double forward_macs, double factor) {
    if (forward_macs < 0) throw std::invalid_argument("training_macs: negative forward MACs");
    return factor * forward_macs;
}

}  // namespace distreal
