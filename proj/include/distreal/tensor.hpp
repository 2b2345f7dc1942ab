#pragma once

#include <cstddef>
#include <stdexcept>
#include <vector>

namespace distreal {

// Dense 4-D tensor, row-major (batch, channel, height, width), 64-bit floats.
struct Tensor4 {
    int b = 0, c = 0, h = 0, w = 0;
    std::vector<double> data;

    Tensor4() = default;
    Tensor4(int b_, int c_, int h_, int w_)
        : b(b_), c(c_), h(h_), w(w_),
          data(static_cast<std::size_t>(b_) * c_ * h_ * w_, 0.0) {
        if (b_ < 1 || c_ < 1 || h_ < 1 || w_ < 1)
            throw std::invalid_argument("Tensor4: all dims must be >= 1");
    }

    std::size_t size() const { return data.size(); }

    double& at(int bi, int ci, int y, int x) {
        return data[((static_cast<std::size_t>(bi) * c + ci) * h + y) * w + x];
    }
    double at(int bi, int ci, int y, int x) const {
        return data[((static_cast<std::size_t>(bi) * c + ci) * h + y) * w + x];
    }

    const double* channel(int bi, int ci) const {
        return data.data() + (static_cast<std::size_t>(bi) * c + ci) * h * w;
    }
    double* channel(int bi, int ci) {
        return data.data() + (static_cast<std::size_t>(bi) * c + ci) * h * w;
    }
};

// Activation restricted to surviving channels. valid_idx maps the rows of
// `values` back to channel indices of the full tensor; it is kept strictly
// increasing so representations are canonical.
struct SparseActivation {
    Tensor4 values;
    std::vector<int> valid_idx;  // size == values.c

    bool full(int original_channels) const {
        return static_cast<int>(valid_idx.size()) == original_channels;
    }
};

}  // namespace distreal
