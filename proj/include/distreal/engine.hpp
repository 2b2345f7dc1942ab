#pragma once

#include <cstdint>
#include <stdexcept>
#include <vector>

#include "distreal/network.hpp"
#include "distreal/rng.hpp"
#include "distreal/tensor.hpp"

namespace distreal {

struct numerical_error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

// Bernoulli filter sampling: each filter kept with probability (1 - d).
// A layer that would end up with zero filters is resampled until non-empty.
MaskSet sample_masks(const DropoutVector& d, const NetworkSpec& spec, Rng& rng);

struct ForwardCache {
    std::vector<SparseActivation> inputs;        // activation entering each layer
    std::vector<std::vector<int>> pool_argmax;   // flat in-window index per output element
    Tensor4 logits;
    bool training = false;
    bool valid = false;
    MaskSet masks;  // copy of the masks the pass ran with (empty when none)
};

// Forward pass. During a masked training pass the sparse region computes only
// surviving channels and fuses the 1/(1-d) scale into each conv output;
// sparse_end re-inserts zeros at dropped positions. Inference (training=false,
// masks=nullptr) runs the full model unscaled.
Tensor4 forward(const NetworkSpec& spec, const Weights& weights, const Tensor4& input,
                const MaskSet* masks, bool training, ForwardCache* cache = nullptr);

// Mean softmax cross-entropy over the batch; optionally emits dL/dlogits.
double softmax_cross_entropy(const Tensor4& logits, const std::vector<int>& labels,
                             Tensor4* dlogits = nullptr);

// Backprop through the cached training pass. Gradient entries for dropped
// filters (and their dropped-input columns) are exactly zero.
Gradients backward(const NetworkSpec& spec, const Weights& weights, const ForwardCache& cache,
                   const std::vector<int>& labels, double* loss_out = nullptr);

// Per-parameter update eligibility, used by techniques that train an
// extracted subnetwork and must leave all other weights untouched.
struct ParamMask {
    std::vector<std::vector<std::uint8_t>> w, b;
};
ParamMask subnet_param_mask(const NetworkSpec& spec, const MaskSet& masks);

// v <- momentum*v + (g + weight_decay*w); w <- w - lr*v. Applies to every
// parameter unless restrict_to limits the update to a subnetwork.
void sgd_step(const NetworkSpec& spec, Weights& weights, const Gradients& grads, double lr,
              double momentum = 0.9, double weight_decay = 1e-4,
              const ParamMask* restrict_to = nullptr);

// Top-1 accuracy with the full model (no masks, no scaling).
double evaluate(const NetworkSpec& spec, const Weights& weights, const Tensor4& images,
                const std::vector<int>& labels, int batch_size = 256);

// Serial mask-free reference implementation, kept for equivalence tests and
// the kernel benchmark. Matches the sparse path bit-for-bit at d = 0.
namespace reference {

Tensor4 forward(const NetworkSpec& spec, const Weights& weights, const Tensor4& input,
                ForwardCache* cache = nullptr);
Gradients backward(const NetworkSpec& spec, const Weights& weights, const ForwardCache& cache,
                   const std::vector<int>& labels, double* loss_out = nullptr);

}  // namespace reference

}  // namespace distreal
