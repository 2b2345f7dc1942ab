#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "distreal/tensor.hpp"

namespace distreal {

struct Dataset {
    Tensor4 images;           // (n, c, h, w), values in [0, 1]
    std::vector<int> labels;  // < class_count
    int class_count = 0;

    int size() const { return static_cast<int>(labels.size()); }
};

// IDX (MNIST-family) readers; big-endian headers, pixels scaled to [0, 1].
Dataset load_idx(const std::string& images_path, const std::string& labels_path);

// Deterministic class-conditional synthetic images: smoothed per-class
// prototypes plus difficulty-controlled shift and noise. difficulty 0 gives
// noiseless, linearly separable data.
Dataset synthesize(int classes, int samples_per_class, int image_size, double difficulty,
                   std::uint64_t seed);

enum class PartitionMode { iid, non_iid_shards };

// Disjoint per-device sample index lists.
std::vector<std::vector<int>> partition(const Dataset& data, int devices,
                                        int samples_per_device, PartitionMode mode,
                                        std::uint64_t seed);

enum class Distortion { color_jitter_half, rotate90 };

Dataset distort(const Dataset& data, Distortion kind, std::uint64_t seed);

// Brightness/contrast/saturation with explicit factors (1.0 = identity),
// clamped to [0, 1]. Factor order: brightness, contrast, saturation.
void apply_color_jitter(double* pixels, int channels, int hw, double brightness,
                        double contrast, double saturation);

// Copies the selected samples into a new dataset (order follows `idx`).
Dataset gather(const Dataset& data, const std::vector<int>& idx);

// Contiguous range [begin, end) as a batch tensor plus labels.
void make_batch(const Dataset& data, const std::vector<int>& idx, int begin, int end,
                Tensor4& images, std::vector<int>& labels);

}  // namespace distreal
