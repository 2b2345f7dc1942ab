#pragma once

#include <vector>

#include "distreal/network.hpp"

namespace distreal {

// Expected forward MACs per layer (aligned with spec.layers; markers and
// flatten cost 0) and their total, for one sample.
struct MacBreakdown {
    std::vector<double> per_layer;
    double total = 0.0;
};

// (1-d) * |Y| * ((1-d_p) * c_i * k_w * k_h + b), |Y| = c_out*h_out*w_out of
// the dense layer.
double conv_expected_macs(double d, double d_prev, double out_values, double c_in, double k_w,
                          double k_h, bool bias);

// (1-d_p) * x for activation/pooling/normalization layers.
double elementwise_expected_macs(double d_prev, double dense_macs);

// Chains d_prev through the layer sequence; the first conv sees d_prev = 0
// and everything after sparse_end sees the full channel count.
MacBreakdown network_expected_macs(const NetworkSpec& spec, const DropoutVector& d);

// Exact MAC count for one sampled mask set (survivor counts instead of
// expectations).
double realized_macs(const NetworkSpec& spec, const MaskSet& masks);

// Cost of one training step relative to the forward pass.
double training_macs(double forward_macs, double factor = 2.0);

}  // namespace distreal
