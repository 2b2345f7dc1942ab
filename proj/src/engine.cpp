#include "distreal/engine.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>

namespace distreal {

MaskSet sample_masks(const DropoutVector& d, const NetworkSpec& spec, Rng& rng) {
    if (static_cast<int>(d.size()) != spec.conv_count())
        throw std::invalid_argument("sample_masks: one rate per conv layer required");
    for (double r : d)
        if (!(r >= 0.0 && r <= 0.5))
            throw std::invalid_argument("sample_masks: rate outside [0, 0.5]");

    MaskSet m;
    std::size_t j = 0;
    for (const auto& l : spec.layers) {
        if (l.kind != LayerKind::conv) continue;
        LayerMask lm;
        lm.rate = d[j++];
        double keep = 1.0 - lm.rate;
        do {
            lm.kept.clear();
            for (int f = 0; f < l.c_out; ++f)
                if (rng.bernoulli(keep)) lm.kept.push_back(f);
        } while (lm.kept.empty());  // resample: a layer must keep at least one filter
        m.conv_masks.push_back(std::move(lm));
    }
    return m;
}

namespace {

std::vector<int> full_indices(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
}

// O'[vo] = (I'[vi] * W[vo,vi,:,:] + B[vo]) * scale
void conv_forward_kernel(const Tensor4& in, const std::vector<int>& vi,
                         const std::vector<int>& vo, const LayerParams& p, const Layer& l,
                         int c_in_full, double scale, Tensor4& out) {
    const int b = in.b, h_in = in.h, w_in = in.w;
    const int h_out = out.h, w_out = out.w;
    const int n_vi = static_cast<int>(vi.size());
    const int n_vo = static_cast<int>(vo.size());
    const bool bias = !p.b.empty();

#pragma omp parallel for collapse(2) schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        for (int oi = 0; oi < n_vo; ++oi) {
            const int oc = vo[static_cast<std::size_t>(oi)];
            double* dst = out.channel(bi, oi);
            for (int oy = 0; oy < h_out; ++oy) {
                for (int ox = 0; ox < w_out; ++ox) {
                    double acc = bias ? p.b[static_cast<std::size_t>(oc)] : 0.0;
                    for (int ii = 0; ii < n_vi; ++ii) {
                        const int ic = vi[static_cast<std::size_t>(ii)];
                        const double* src = in.channel(bi, ii);
                        const double* wrow =
                            p.w.data() +
                            (static_cast<std::size_t>(oc) * c_in_full + ic) * l.k_h * l.k_w;
                        for (int ky = 0; ky < l.k_h; ++ky) {
                            const int iy = oy * l.stride + ky - l.padding;
                            if (iy < 0 || iy >= h_in) continue;
                            for (int kx = 0; kx < l.k_w; ++kx) {
                                const int ix = ox * l.stride + kx - l.padding;
                                if (ix < 0 || ix >= w_in) continue;
                                acc += src[iy * w_in + ix] * wrow[ky * l.k_w + kx];
                            }
                        }
                    }
                    dst[oy * w_out + ox] = acc * scale;
                }
            }
        }
    }
}

void dense_forward_kernel(const Tensor4& in, const LayerParams& p, int n_out, Tensor4& out) {
    const int b = in.b, n_in = in.c;
    const bool bias = !p.b.empty();
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        const double* x = in.channel(bi, 0);
        for (int o = 0; o < n_out; ++o) {
            double acc = bias ? p.b[static_cast<std::size_t>(o)] : 0.0;
            const double* wrow = p.w.data() + static_cast<std::size_t>(o) * n_in;
            for (int i = 0; i < n_in; ++i) acc += wrow[i] * x[i];
            out.at(bi, o, 0, 0) = acc;
        }
    }
}

}  // namespace

Tensor4 forward(const NetworkSpec& spec, const Weights& weights, const Tensor4& input,
                const MaskSet* masks, bool training, ForwardCache* cache) {
    if (input.c != spec.input_dims[0] || input.h != spec.input_dims[1] ||
        input.w != spec.input_dims[2])
        throw std::invalid_argument("forward: input dims do not match spec");
    if (training && masks == nullptr)
        throw std::invalid_argument("forward: training pass requires masks");
    if (!training && masks != nullptr)
        throw std::invalid_argument("forward: inference runs the full model without masks");
    if (masks && static_cast<int>(masks->conv_masks.size()) != spec.conv_count())
        throw std::invalid_argument("forward: mask count does not match conv count");

    if (cache) {
        cache->inputs.assign(spec.layers.size(), SparseActivation{});
        cache->pool_argmax.assign(spec.layers.size(), {});
        cache->training = training;
        cache->masks = masks ? *masks : MaskSet{};
        cache->valid = false;
    }

    SparseActivation act;
    act.values = input;
    act.valid_idx = full_indices(input.c);
    auto dims = spec.chain_dims();
    Dims in_dims{spec.input_dims[0], spec.input_dims[1], spec.input_dims[2]};

    int conv_ord = 0;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const Layer& l = spec.layers[li];
        if (cache) cache->inputs[li] = act;
        switch (l.kind) {
            case LayerKind::sparse_begin:
                act.valid_idx = full_indices(in_dims.c);
                break;
            case LayerKind::conv: {
                const LayerMask* lm =
                    masks ? &masks->conv_masks[static_cast<std::size_t>(conv_ord)] : nullptr;
                std::vector<int> vo = lm ? lm->kept : full_indices(l.c_out);
                double scale = (training && lm) ? 1.0 / (1.0 - lm->rate) : 1.0;
                Tensor4 out(act.values.b, static_cast<int>(vo.size()), dims[li].h, dims[li].w);
                conv_forward_kernel(act.values, act.valid_idx, vo,
                                    weights.params[li], l, in_dims.c, scale, out);
                act.values = std::move(out);
                act.valid_idx = std::move(vo);
                ++conv_ord;
                break;
            }
            case LayerKind::relu: {
                for (double& v : act.values.data) v = v > 0.0 ? v : 0.0;
                break;
            }
            case LayerKind::max_pool: {
                const Tensor4& in = act.values;
                Tensor4 out(in.b, in.c, dims[li].h, dims[li].w);
                std::vector<int> argmax(out.size());
                for (int bi = 0; bi < in.b; ++bi) {
                    for (int ci = 0; ci < in.c; ++ci) {
                        const double* src = in.channel(bi, ci);
                        double* dst = out.channel(bi, ci);
                        int* amx = argmax.data() +
                                   (static_cast<std::size_t>(bi) * in.c + ci) * out.h * out.w;
                        for (int oy = 0; oy < out.h; ++oy) {
                            for (int ox = 0; ox < out.w; ++ox) {
                                double best = -1e300;
                                int best_at = 0;
                                for (int ky = 0; ky < l.pool_k; ++ky) {
                                    for (int kx = 0; kx < l.pool_k; ++kx) {
                                        int iy = oy * l.pool_stride + ky;
                                        int ix = ox * l.pool_stride + kx;
                                        double v = src[iy * in.w + ix];
                                        if (v > best) {
                                            best = v;
                                            best_at = iy * in.w + ix;
                                        }
                                    }
                                }
                                dst[oy * out.w + ox] = best;
                                amx[oy * out.w + ox] = best_at;
                            }
                        }
                    }
                }
                act.values = std::move(out);
                if (cache) cache->pool_argmax[li] = std::move(argmax);
                break;
            }
            case LayerKind::sparse_end: {
                const int c_full = in_dims.c;
                if (static_cast<int>(act.valid_idx.size()) != c_full) {
                    const Tensor4& in = act.values;
                    Tensor4 out(in.b, c_full, in.h, in.w);
                    for (int bi = 0; bi < in.b; ++bi)
                        for (std::size_t vi = 0; vi < act.valid_idx.size(); ++vi)
                            std::copy(in.channel(bi, static_cast<int>(vi)),
                                      in.channel(bi, static_cast<int>(vi)) + in.h * in.w,
                                      out.channel(bi, act.valid_idx[vi]));
                    act.values = std::move(out);
                }
                act.valid_idx = full_indices(c_full);
                break;
            }
            case LayerKind::flatten: {
                act.values.c = act.values.c * act.values.h * act.values.w;
                act.values.h = 1;
                act.values.w = 1;
                act.valid_idx = full_indices(act.values.c);
                break;
            }
            case LayerKind::dense: {
                Tensor4 out(act.values.b, l.n_out, 1, 1);
                dense_forward_kernel(act.values, weights.params[li], l.n_out, out);
                act.values = std::move(out);
                act.valid_idx = full_indices(l.n_out);
                break;
            }
        }
        in_dims = dims[li];
    }

    if (cache) {
        cache->logits = act.values;
        cache->valid = true;
    }
    return act.values;
}

double softmax_cross_entropy(const Tensor4& logits, const std::vector<int>& labels,
                             Tensor4* dlogits) {
    const int b = logits.b, k = logits.c;
    if (static_cast<int>(labels.size()) != b)
        throw std::invalid_argument("softmax_cross_entropy: label count mismatch");
    if (dlogits) *dlogits = Tensor4(b, k, 1, 1);
    double loss = 0.0;
    for (int bi = 0; bi < b; ++bi) {
        const double* z = logits.channel(bi, 0);
        double zmax = z[0];
        for (int i = 1; i < k; ++i) zmax = std::max(zmax, z[i]);
        double sum = 0.0;
        for (int i = 0; i < k; ++i) sum += std::exp(z[i] - zmax);
        const int y = labels[static_cast<std::size_t>(bi)];
        loss += -(z[y] - zmax - std::log(sum));
        if (dlogits) {
            double* g = dlogits->channel(bi, 0);
            for (int i = 0; i < k; ++i)
                g[i] = (std::exp(z[i] - zmax) / sum - (i == y ? 1.0 : 0.0)) / b;
        }
    }
    return loss / b;
}

namespace {

// Gradient kernels. Each output entry is accumulated serially by a single
// thread in a fixed order, so results are identical for any thread count.
void conv_backward_kernel(const Tensor4& in, const std::vector<int>& vi,
                          const std::vector<int>& vo, const LayerParams& p, const Layer& l,
                          int c_in_full, double scale, const Tensor4& dout, LayerParams& gp,
                          Tensor4& din) {
    const int b = in.b, h_in = in.h, w_in = in.w;
    const int h_out = dout.h, w_out = dout.w;
    const int n_vi = static_cast<int>(vi.size());
    const int n_vo = static_cast<int>(vo.size());
    const bool bias = !p.b.empty();

#pragma omp parallel for schedule(static)
    for (int oi = 0; oi < n_vo; ++oi) {
        const int oc = vo[static_cast<std::size_t>(oi)];
        double* gw_base =
            gp.w.data() + static_cast<std::size_t>(oc) * c_in_full * l.k_h * l.k_w;
        double gb = 0.0;
        for (int bi = 0; bi < b; ++bi) {
            const double* gout = dout.channel(bi, oi);
            for (int oy = 0; oy < h_out; ++oy) {
                for (int ox = 0; ox < w_out; ++ox) {
                    const double g = gout[oy * w_out + ox] * scale;
                    gb += g;
                    for (int ii = 0; ii < n_vi; ++ii) {
                        const int ic = vi[static_cast<std::size_t>(ii)];
                        const double* src = in.channel(bi, ii);
                        double* gw = gw_base + static_cast<std::size_t>(ic) * l.k_h * l.k_w;
                        for (int ky = 0; ky < l.k_h; ++ky) {
                            const int iy = oy * l.stride + ky - l.padding;
                            if (iy < 0 || iy >= h_in) continue;
                            for (int kx = 0; kx < l.k_w; ++kx) {
                                const int ix = ox * l.stride + kx - l.padding;
                                if (ix < 0 || ix >= w_in) continue;
                                gw[ky * l.k_w + kx] += g * src[iy * w_in + ix];
                            }
                        }
                    }
                }
            }
        }
        if (bias) gp.b[static_cast<std::size_t>(oc)] = gb;
    }

#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        for (int oi = 0; oi < n_vo; ++oi) {
            const int oc = vo[static_cast<std::size_t>(oi)];
            const double* gout = dout.channel(bi, oi);
            for (int oy = 0; oy < h_out; ++oy) {
                for (int ox = 0; ox < w_out; ++ox) {
                    const double g = gout[oy * w_out + ox] * scale;
                    for (int ii = 0; ii < n_vi; ++ii) {
                        const int ic = vi[static_cast<std::size_t>(ii)];
                        double* gin = din.channel(bi, ii);
                        const double* wrow =
                            p.w.data() +
                            (static_cast<std::size_t>(oc) * c_in_full + ic) * l.k_h * l.k_w;
                        for (int ky = 0; ky < l.k_h; ++ky) {
                            const int iy = oy * l.stride + ky - l.padding;
                            if (iy < 0 || iy >= h_in) continue;
                            for (int kx = 0; kx < l.k_w; ++kx) {
                                const int ix = ox * l.stride + kx - l.padding;
                                if (ix < 0 || ix >= w_in) continue;
                                gin[iy * w_in + ix] += wrow[ky * l.k_w + kx] * g;
                            }
                        }
                    }
                }
            }
        }
    }
}

void dense_backward_kernel(const Tensor4& in, const LayerParams& p, const Tensor4& dout,
                           LayerParams& gp, Tensor4& din) {
    const int b = in.b, n_in = in.c, n_out = dout.c;
    const bool bias = !p.b.empty();
#pragma omp parallel for schedule(static)
    for (int o = 0; o < n_out; ++o) {
        double* gw = gp.w.data() + static_cast<std::size_t>(o) * n_in;
        double gb = 0.0;
        for (int bi = 0; bi < b; ++bi) {
            const double g = dout.at(bi, o, 0, 0);
            gb += g;
            const double* x = in.channel(bi, 0);
            for (int i = 0; i < n_in; ++i) gw[i] += g * x[i];
        }
        if (bias) gp.b[static_cast<std::size_t>(o)] = gb;
    }
#pragma omp parallel for schedule(static)
    for (int bi = 0; bi < b; ++bi) {
        double* gx = din.channel(bi, 0);
        for (int o = 0; o < n_out; ++o) {
            const double g = dout.at(bi, o, 0, 0);
            const double* wrow = p.w.data() + static_cast<std::size_t>(o) * n_in;
            for (int i = 0; i < n_in; ++i) gx[i] += wrow[i] * g;
        }
    }
}

}  // namespace

Gradients backward(const NetworkSpec& spec, const Weights& weights, const ForwardCache& cache,
                   const std::vector<int>& labels, double* loss_out) {
    if (!cache.valid || !cache.training)
        throw std::logic_error("backward: requires a cache from a training-mode forward pass");

    Gradients grads = Gradients::zeros_like(spec);
    Tensor4 grad;
    double loss = softmax_cross_entropy(cache.logits, labels, &grad);
    if (loss_out) *loss_out = loss;

    auto dims = spec.chain_dims();
    const bool masked = !cache.masks.conv_masks.empty();
    int conv_ord = spec.conv_count();

    for (int li = static_cast<int>(spec.layers.size()) - 1; li >= 0; --li) {
        const Layer& l = spec.layers[static_cast<std::size_t>(li)];
        const SparseActivation& in = cache.inputs[static_cast<std::size_t>(li)];
        switch (l.kind) {
            case LayerKind::dense: {
                Tensor4 din(in.values.b, in.values.c, 1, 1);
                dense_backward_kernel(in.values, weights.params[static_cast<std::size_t>(li)],
                                      grad, grads.params[static_cast<std::size_t>(li)], din);
                grad = std::move(din);
                break;
            }
            case LayerKind::flatten: {
                grad.c = in.values.c;
                grad.h = in.values.h;
                grad.w = in.values.w;
                break;
            }
            case LayerKind::sparse_end: {
                if (static_cast<int>(in.valid_idx.size()) != grad.c) {
                    Tensor4 g(grad.b, static_cast<int>(in.valid_idx.size()), grad.h, grad.w);
                    for (int bi = 0; bi < grad.b; ++bi)
                        for (std::size_t vi = 0; vi < in.valid_idx.size(); ++vi)
                            std::copy(grad.channel(bi, in.valid_idx[vi]),
                                      grad.channel(bi, in.valid_idx[vi]) + grad.h * grad.w,
                                      g.channel(bi, static_cast<int>(vi)));
                    grad = std::move(g);
                }
                break;
            }
            case LayerKind::relu: {
                for (std::size_t i = 0; i < grad.data.size(); ++i)
                    if (in.values.data[i] <= 0.0) grad.data[i] = 0.0;
                break;
            }
            case LayerKind::max_pool: {
                Tensor4 din(in.values.b, in.values.c, in.values.h, in.values.w);
                const auto& amx = cache.pool_argmax[static_cast<std::size_t>(li)];
                for (int bi = 0; bi < grad.b; ++bi) {
                    for (int ci = 0; ci < grad.c; ++ci) {
                        const double* g = grad.channel(bi, ci);
                        double* d = din.channel(bi, ci);
                        const int* a = amx.data() +
                                       (static_cast<std::size_t>(bi) * grad.c + ci) * grad.h *
                                           grad.w;
                        for (int i = 0; i < grad.h * grad.w; ++i) d[a[i]] += g[i];
                    }
                }
                grad = std::move(din);
                break;
            }
            case LayerKind::conv: {
                --conv_ord;
                const LayerMask* lm =
                    masked ? &cache.masks.conv_masks[static_cast<std::size_t>(conv_ord)]
                           : nullptr;
                std::vector<int> vo = lm ? lm->kept : full_indices(l.c_out);
                double scale = (cache.training && lm) ? 1.0 / (1.0 - lm->rate) : 1.0;
                const int c_in_full =
                    li > 0 ? dims[static_cast<std::size_t>(li - 1)].c : spec.input_dims[0];
                Tensor4 din(in.values.b, in.values.c, in.values.h, in.values.w);
                conv_backward_kernel(in.values, in.valid_idx, vo,
                                     weights.params[static_cast<std::size_t>(li)], l,
                                     c_in_full, scale, grad,
                                     grads.params[static_cast<std::size_t>(li)], din);
                grad = std::move(din);
                break;
            }
            case LayerKind::sparse_begin:
                break;  // nothing with parameters below the sparse region
        }
        if (l.kind == LayerKind::sparse_begin) break;
    }
    return grads;
}

ParamMask subnet_param_mask(const NetworkSpec& spec, const MaskSet& masks) {
    ParamMask pm;
    pm.w.resize(spec.layers.size());
    pm.b.resize(spec.layers.size());
    auto dims = spec.chain_dims();
    Dims in{spec.input_dims[0], spec.input_dims[1], spec.input_dims[2]};

    int conv_ord = 0;
    int last_conv_ord = -1;
    Dims flatten_in{0, 0, 0};
    bool first_dense_done = false;
    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const Layer& l = spec.layers[li];
        if (l.kind == LayerKind::conv) {
            std::vector<std::uint8_t> kept_out(static_cast<std::size_t>(l.c_out), 0);
            for (int f : masks.conv_masks[static_cast<std::size_t>(conv_ord)].kept)
                kept_out[static_cast<std::size_t>(f)] = 1;
            std::vector<std::uint8_t> kept_in(static_cast<std::size_t>(in.c), 1);
            if (last_conv_ord >= 0) {
                std::fill(kept_in.begin(), kept_in.end(), 0);
                for (int f : masks.conv_masks[static_cast<std::size_t>(last_conv_ord)].kept)
                    kept_in[static_cast<std::size_t>(f)] = 1;
            }
            pm.w[li].assign(static_cast<std::size_t>(l.c_out) * in.c * l.k_h * l.k_w, 0);
            for (int oc = 0; oc < l.c_out; ++oc)
                for (int ic = 0; ic < in.c; ++ic)
                    if (kept_out[static_cast<std::size_t>(oc)] &&
                        kept_in[static_cast<std::size_t>(ic)])
                        std::fill_n(pm.w[li].begin() +
                                        (static_cast<std::size_t>(oc) * in.c + ic) * l.k_h *
                                            l.k_w,
                                    static_cast<std::size_t>(l.k_h) * l.k_w, 1);
            pm.b[li] = kept_out;
            last_conv_ord = conv_ord++;
        } else if (l.kind == LayerKind::flatten) {
            flatten_in = in;
        } else if (l.kind == LayerKind::sparse_end) {
            // channels re-densify; remember which came from the last conv
        } else if (l.kind == LayerKind::dense) {
            pm.w[li].assign(static_cast<std::size_t>(l.n_out) * in.c, 1);
            pm.b[li].assign(static_cast<std::size_t>(l.n_out), 1);
            if (!first_dense_done && last_conv_ord >= 0 && flatten_in.c > 0 &&
                flatten_in.c * flatten_in.h * flatten_in.w == in.c) {
                // columns wired to dropped channels of the last conv stay frozen
                std::vector<std::uint8_t> kept(static_cast<std::size_t>(flatten_in.c), 0);
                for (int f : masks.conv_masks[static_cast<std::size_t>(last_conv_ord)].kept)
                    kept[static_cast<std::size_t>(f)] = 1;
                const int group = flatten_in.h * flatten_in.w;
                for (int o = 0; o < l.n_out; ++o)
                    for (int i = 0; i < in.c; ++i)
                        if (!kept[static_cast<std::size_t>(i / group)])
                            pm.w[li][static_cast<std::size_t>(o) * in.c + i] = 0;
            }
            first_dense_done = true;
        }
        in = dims[li];
    }
    return pm;
}

void sgd_step(const NetworkSpec& spec, Weights& weights, const Gradients& grads, double lr,
              double momentum, double weight_decay, const ParamMask* restrict_to) {
    for (const auto& gp : grads.params)
        for (double g : gp.w)
            if (!std::isfinite(g)) throw numerical_error("sgd_step: non-finite gradient");

    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        auto& p = weights.params[li];
        auto& m = weights.momentum[li];
        const auto& g = grads.params[li];
        for (std::size_t i = 0; i < p.w.size(); ++i) {
            if (restrict_to && !restrict_to->w[li][i]) continue;
            m.w[i] = momentum * m.w[i] + (g.w[i] + weight_decay * p.w[i]);
            p.w[i] -= lr * m.w[i];
        }
        for (std::size_t i = 0; i < p.b.size(); ++i) {
            if (restrict_to && !restrict_to->b[li][i]) continue;
            m.b[i] = momentum * m.b[i] + (g.b[i] + weight_decay * p.b[i]);
            p.b[i] -= lr * m.b[i];
        }
    }
}

double evaluate(const NetworkSpec& spec, const Weights& weights, const Tensor4& images,
                const std::vector<int>& labels, int batch_size) {
    if (labels.empty()) throw std::invalid_argument("evaluate: empty dataset");
    if (images.b != static_cast<int>(labels.size()))
        throw std::invalid_argument("evaluate: image/label count mismatch");

    int correct = 0;
    for (int start = 0; start < images.b; start += batch_size) {
        const int n = std::min(batch_size, images.b - start);
        Tensor4 batch(n, images.c, images.h, images.w);
        std::copy(images.data.begin() +
                      static_cast<std::size_t>(start) * images.c * images.h * images.w,
                  images.data.begin() +
                      static_cast<std::size_t>(start + n) * images.c * images.h * images.w,
                  batch.data.begin());
        Tensor4 logits = forward(spec, weights, batch, nullptr, false);
        for (int bi = 0; bi < n; ++bi) {
            const double* z = logits.channel(bi, 0);
            int arg = 0;
            for (int i = 1; i < logits.c; ++i)
                if (z[i] > z[arg]) arg = i;
            if (arg == labels[static_cast<std::size_t>(start + bi)]) ++correct;
        }
    }
    return static_cast<double>(correct) / static_cast<double>(labels.size());
}

}  // namespace distreal
