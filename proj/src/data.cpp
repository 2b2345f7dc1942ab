#include "distreal/data.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <stdexcept>

#include "distreal/rng.hpp"

namespace distreal {

namespace {

std::uint32_t read_be32(std::istream& in) {
    unsigned char b[4];
    in.read(reinterpret_cast<char*>(b), 4);
    if (!in) throw std::runtime_error("idx: truncated header");
    return (std::uint32_t(b[0]) << 24) | (std::uint32_t(b[1]) << 16) |
           (std::uint32_t(b[2]) << 8) | std::uint32_t(b[3]);
}

}  // namespace

Dataset load_idx(const std::string& images_path, const std::string& labels_path) {
    std::ifstream imgs(images_path, std::ios::binary);
    if (!imgs) throw std::runtime_error("idx: cannot open " + images_path);
    std::ifstream lbls(labels_path, std::ios::binary);
    if (!lbls) throw std::runtime_error("idx: cannot open " + labels_path);

    if (read_be32(imgs) != 0x00000803u)
        throw std::runtime_error("idx: bad image magic in " + images_path);
    const std::uint32_t n = read_be32(imgs);
    const std::uint32_t h = read_be32(imgs);
    const std::uint32_t w = read_be32(imgs);

    if (read_be32(lbls) != 0x00000801u)
        throw std::runtime_error("idx: bad label magic in " + labels_path);
    const std::uint32_t nl = read_be32(lbls);
    if (n != nl) throw std::runtime_error("idx: image/label count mismatch");
    if (n == 0 || h == 0 || w == 0) throw std::runtime_error("idx: empty dataset");

    Dataset d;
    d.images = Tensor4(static_cast<int>(n), 1, static_cast<int>(h), static_cast<int>(w));
    std::vector<unsigned char> buf(static_cast<std::size_t>(h) * w);
    for (std::uint32_t i = 0; i < n; ++i) {
        imgs.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
        if (!imgs) throw std::runtime_error("idx: truncated image data");
        double* dst = d.images.channel(static_cast<int>(i), 0);
        for (std::size_t k = 0; k < buf.size(); ++k) dst[k] = buf[k] / 255.0;
    }
    d.labels.resize(n);
    int max_label = 0;
    for (std::uint32_t i = 0; i < n; ++i) {
        char c;
        lbls.read(&c, 1);
        if (!lbls) throw std::runtime_error("idx: truncated label data");
        d.labels[i] = static_cast<unsigned char>(c);
        max_label = std::max(max_label, d.labels[i]);
    }
    d.class_count = max_label + 1;
    return d;
}

namespace {

// 3x3 box blur with clamped borders, applied in place.
void box_blur(std::vector<double>& img, int s) {
    std::vector<double> out(img.size());
    for (int y = 0; y < s; ++y) {
        for (int x = 0; x < s; ++x) {
            double acc = 0.0;
            int cnt = 0;
            for (int dy = -1; dy <= 1; ++dy) {
                for (int dx = -1; dx <= 1; ++dx) {
                    int yy = y + dy, xx = x + dx;
                    if (yy < 0 || yy >= s || xx < 0 || xx >= s) continue;
                    acc += img[static_cast<std::size_t>(yy) * s + xx];
                    ++cnt;
                }
            }
            out[static_cast<std::size_t>(y) * s + x] = acc / cnt;
        }
    }
    img = std::move(out);
}

}  // namespace

Dataset synthesize(int classes, int samples_per_class, int image_size, double difficulty,
                   std::uint64_t seed) {
    if (classes < 2 || samples_per_class < 1 || image_size < 4)
        throw std::invalid_argument("synthesize: parameters must be positive");
    if (difficulty < 0.0) throw std::invalid_argument("synthesize: negative difficulty");

    // Per-class prototype: smoothed random field stretched to [0.05, 0.95].
    std::vector<std::vector<double>> protos(static_cast<std::size_t>(classes));
    for (int c = 0; c < classes; ++c) {
        Rng rng = make_rng(seed, Stream::synth_data, {0xABCDu, static_cast<std::uint64_t>(c)});
        auto& p = protos[static_cast<std::size_t>(c)];
        p.resize(static_cast<std::size_t>(image_size) * image_size);
        for (double& v : p) v = rng.u01();
        box_blur(p, image_size);
        box_blur(p, image_size);
        double lo = *std::min_element(p.begin(), p.end());
        double hi = *std::max_element(p.begin(), p.end());
        for (double& v : p) v = 0.05 + 0.9 * (v - lo) / (hi - lo + 1e-12);
    }

    const int n = classes * samples_per_class;
    Dataset d;
    d.class_count = classes;
    d.images = Tensor4(n, 1, image_size, image_size);
    d.labels.resize(static_cast<std::size_t>(n));

    const int max_shift = static_cast<int>(std::lround(2.0 * difficulty));
    const double noise_sd = 0.35 * difficulty;
    for (int s = 0; s < n; ++s) {
        const int cls = s % classes;
        const int within = s / classes;
        d.labels[static_cast<std::size_t>(s)] = cls;
        Rng rng = make_rng(seed, Stream::synth_data,
                           {1u, static_cast<std::uint64_t>(cls),
                            static_cast<std::uint64_t>(within)});
        int dy = 0, dx = 0;
        if (max_shift > 0) {
            dy = static_cast<int>(rng.uniform_int(2 * max_shift + 1)) - max_shift;
            dx = static_cast<int>(rng.uniform_int(2 * max_shift + 1)) - max_shift;
        }
        const auto& p = protos[static_cast<std::size_t>(cls)];
        double* dst = d.images.channel(s, 0);
        for (int y = 0; y < image_size; ++y) {
            for (int x = 0; x < image_size; ++x) {
                // circular shift keeps the pixel multiset intact
                int sy = (y + dy + image_size) % image_size;
                int sx = (x + dx + image_size) % image_size;
                double v = p[static_cast<std::size_t>(sy) * image_size + sx];
                if (noise_sd > 0.0) v += noise_sd * rng.normal();
                dst[y * image_size + x] = std::clamp(v, 0.0, 1.0);
            }
        }
    }
    return d;
}

std::vector<std::vector<int>> partition(const Dataset& data, int devices,
                                        int samples_per_device, PartitionMode mode,
                                        std::uint64_t seed) {
    if (devices < 1 || samples_per_device < 1)
        throw std::invalid_argument("partition: devices and samples_per_device must be >= 1");
    const long long need = static_cast<long long>(devices) * samples_per_device;
    if (need > data.size())
        throw std::invalid_argument("partition: not enough samples for the requested split");

    Rng rng = make_rng(seed, Stream::data_partition);
    std::vector<std::vector<int>> out(static_cast<std::size_t>(devices));

    if (mode == PartitionMode::iid) {
        std::vector<int> idx(static_cast<std::size_t>(data.size()));
        std::iota(idx.begin(), idx.end(), 0);
        rng.shuffle(idx);
        int k = 0;
        for (int dev = 0; dev < devices; ++dev) {
            out[static_cast<std::size_t>(dev)].assign(idx.begin() + k,
                                                      idx.begin() + k + samples_per_device);
            k += samples_per_device;
        }
        return out;
    }

    // non_iid_shards: sort by label, cut into 2*devices shards, hand each
    // device two random shards (stand-in for LEAF's writer split).
    std::vector<int> idx(static_cast<std::size_t>(data.size()));
    std::iota(idx.begin(), idx.end(), 0);
    std::stable_sort(idx.begin(), idx.end(), [&data](int a, int b) {
        return data.labels[static_cast<std::size_t>(a)] < data.labels[static_cast<std::size_t>(b)];
    });
    const int shard_count = 2 * devices;
    const int shard_size = data.size() / shard_count;
    if (shard_size * 2 < samples_per_device)
        throw std::invalid_argument("partition: shards too small for samples_per_device");
    std::vector<int> shard_order(static_cast<std::size_t>(shard_count));
    std::iota(shard_order.begin(), shard_order.end(), 0);
    rng.shuffle(shard_order);
    for (int dev = 0; dev < devices; ++dev) {
        auto& mine = out[static_cast<std::size_t>(dev)];
        for (int s = 0; s < 2; ++s) {
            const int shard = shard_order[static_cast<std::size_t>(2 * dev + s)];
            for (int i = 0; i < shard_size; ++i)
                mine.push_back(idx[static_cast<std::size_t>(shard * shard_size + i)]);
        }
        mine.resize(static_cast<std::size_t>(samples_per_device));
    }
    return out;
}

void apply_color_jitter(double* pixels, int channels, int hw, double brightness,
                        double contrast, double saturation) {
    // brightness
    for (int i = 0; i < channels * hw; ++i) pixels[i] *= brightness;
    // contrast around the gray mean
    double mean = 0.0;
    for (int i = 0; i < channels * hw; ++i) mean += pixels[i];
    mean /= channels * hw;
    for (int i = 0; i < channels * hw; ++i) pixels[i] = mean + contrast * (pixels[i] - mean);
    // saturation toward per-pixel gray
    for (int p = 0; p < hw; ++p) {
        double gray = 0.0;
        for (int c = 0; c < channels; ++c) gray += pixels[c * hw + p];
        gray /= channels;
        for (int c = 0; c < channels; ++c)
            pixels[c * hw + p] = gray + saturation * (pixels[c * hw + p] - gray);
    }
    for (int i = 0; i < channels * hw; ++i) pixels[i] = std::clamp(pixels[i], 0.0, 1.0);
}

Dataset distort(const Dataset& data, Distortion kind, std::uint64_t seed) {
    Dataset out = data;
    const int c = data.images.c, h = data.images.h, w = data.images.w;
    if (kind == Distortion::rotate90) {
        if (h != w) throw std::invalid_argument("distort: rotate90 requires square images");
        for (int s = 0; s < data.size(); ++s) {
            for (int ci = 0; ci < c; ++ci) {
                const double* src = data.images.channel(s, ci);
                double* dst = out.images.channel(s, ci);
                for (int y = 0; y < h; ++y)
                    for (int x = 0; x < w; ++x) dst[y * w + x] = src[x * w + (h - 1 - y)];
            }
        }
        return out;
    }

    if (c < 2)
        throw std::invalid_argument("distort: color jitter requires multi-channel images");
    for (int s = 0; s < data.size(); ++s) {
        Rng rng = make_rng(seed, Stream::distortion, {static_cast<std::uint64_t>(s)});
        const double fb = rng.uniform(0.5, 1.5);
        const double fc = rng.uniform(0.5, 1.5);
        const double fs = rng.uniform(0.5, 1.5);
        apply_color_jitter(out.images.channel(s, 0), c, h * w, fb, fc, fs);
    }
    return out;
}

Dataset gather(const Dataset& data, const std::vector<int>& idx) {
    if (idx.empty()) throw std::invalid_argument("gather: empty index list");
    Dataset out;
    out.class_count = data.class_count;
    out.images = Tensor4(static_cast<int>(idx.size()), data.images.c, data.images.h,
                         data.images.w);
    out.labels.resize(idx.size());
    const int chw = data.images.c * data.images.h * data.images.w;
    for (std::size_t i = 0; i < idx.size(); ++i) {
        const int s = idx[i];
        std::copy(data.images.data.begin() + static_cast<std::size_t>(s) * chw,
                  data.images.data.begin() + static_cast<std::size_t>(s + 1) * chw,
                  out.images.data.begin() + i * chw);
        out.labels[i] = data.labels[static_cast<std::size_t>(s)];
    }
    return out;
}

void make_batch(const Dataset& data, const std::vector<int>& idx, int begin, int end,
                Tensor4& images, std::vector<int>& labels) {
    const int n = end - begin;
    images = Tensor4(n, data.images.c, data.images.h, data.images.w);
    labels.resize(static_cast<std::size_t>(n));
    const int chw = data.images.c * data.images.h * data.images.w;
    for (int i = 0; i < n; ++i) {
        const int s = idx[static_cast<std::size_t>(begin + i)];
        std::copy(data.images.data.begin() + static_cast<std::size_t>(s) * chw,
                  data.images.data.begin() + static_cast<std::size_t>(s + 1) * chw,
                  images.data.begin() + static_cast<std::size_t>(i) * chw);
        labels[static_cast<std::size_t>(i)] = data.labels[static_cast<std::size_t>(s)];
    }
}

}  // namespace distreal
