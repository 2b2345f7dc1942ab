#include <algorithm>
#include <cmath>

#include "distreal/engine.hpp"

namespace distreal::reference {

namespace {

std::vector<int> full_indices(int n) {
    std::vector<int> v(static_cast<std::size_t>(n));
    for (int i = 0; i < n; ++i) v[static_cast<std::size_t>(i)] = i;
    return v;
}

}  // namespace

Tensor4 forward(const NetworkSpec& spec, const Weights& weights, const Tensor4& input,
                ForwardCache* cache) {
    if (input.c != spec.input_dims[0] || input.h != spec.input_dims[1] ||
        input.w != spec.input_dims[2])
        throw std::invalid_argument("reference::forward: input dims do not match spec");

    if (cache) {
        cache->inputs.assign(spec.layers.size(), SparseActivation{});
        cache->pool_argmax.assign(spec.layers.size(), {});
        cache->training = true;
        cache->masks = MaskSet{};
        cache->valid = false;
    }

    auto dims = spec.chain_dims();
    Dims in_dims{spec.input_dims[0], spec.input_dims[1], spec.input_dims[2]};
    Tensor4 act = input;

    for (std::size_t li = 0; li < spec.layers.size(); ++li) {
        const Layer& l = spec.layers[li];
        if (cache) {
            cache->inputs[li].values = act;
            cache->inputs[li].valid_idx = full_indices(act.c);
        }
        switch (l.kind) {
            case LayerKind::sparse_begin:
            case LayerKind::sparse_end:
                break;
            case LayerKind::conv: {
                const LayerParams& p = weights.params[li];
                const bool bias = !p.b.empty();
                Tensor4 out(act.b, l.c_out, dims[li].h, dims[li].w);
                for (int bi = 0; bi < act.b; ++bi) {
                    for (int oc = 0; oc < l.c_out; ++oc) {
                        double* dst = out.channel(bi, oc);
                        for (int oy = 0; oy < out.h; ++oy) {
                            for (int ox = 0; ox < out.w; ++ox) {
                                double acc = bias ? p.b[static_cast<std::size_t>(oc)] : 0.0;
                                for (int ic = 0; ic < act.c; ++ic) {
                                    const double* src = act.channel(bi, ic);
                                    const double* wrow =
                                        p.w.data() + (static_cast<std::size_t>(oc) * act.c + ic) *
                                                         l.k_h * l.k_w;
                                    for (int ky = 0; ky < l.k_h; ++ky) {
                                        const int iy = oy * l.stride + ky - l.padding;
                                        if (iy < 0 || iy >= act.h) continue;
                                        for (int kx = 0; kx < l.k_w; ++kx) {
                                            const int ix = ox * l.stride + kx - l.padding;
                                            if (ix < 0 || ix >= act.w) continue;
                                            acc += src[iy * act.w + ix] * wrow[ky * l.k_w + kx];
                                        }
                                    }
                                }
                                dst[oy * out.w + ox] = acc;
                            }
                        }
                    }
                }
                act = std::move(out);
                break;
            }
            case LayerKind::relu:
                for (double& v : act.data) v = v > 0.0 ? v : 0.0;
                break;
            case LayerKind::max_pool: {
                Tensor4 out(act.b, act.c, dims[li].h, dims[li].w);
                std::vector<int> argmax(out.size());
                for (int bi = 0; bi < act.b; ++bi) {
                    for (int ci = 0; ci < act.c; ++ci) {
                        const double* src = act.channel(bi, ci);
                        double* dst = out.channel(bi, ci);
                        int* amx = argmax.data() +
                                   (static_cast<std::size_t>(bi) * act.c + ci) * out.h * out.w;
                        for (int oy = 0; oy < out.h; ++oy) {
                            for (int ox = 0; ox < out.w; ++ox) {
                                double best = -1e300;
                                int best_at = 0;
                                for (int ky = 0; ky < l.pool_k; ++ky) {
                                    for (int kx = 0; kx < l.pool_k; ++kx) {
                                        int iy = oy * l.pool_stride + ky;
                                        int ix = ox * l.pool_stride + kx;
                                        double v = src[iy * act.w + ix];
                                        if (v > best) {
                                            best = v;
                                            best_at = iy * act.w + ix;
                                        }
                                    }
                                }
                                dst[oy * out.w + ox] = best;
                                amx[oy * out.w + ox] = best_at;
                            }
                        }
                    }
                }
                act = std::move(out);
                if (cache) cache->pool_argmax[li] = std::move(argmax);
                break;
            }
            case LayerKind::flatten:
                act.c = act.c * act.h * act.w;
                act.h = 1;
                act.w = 1;
                break;
            case LayerKind::dense: {
                const LayerParams& p = weights.params[li];
                const bool bias = !p.b.empty();
                Tensor4 out(act.b, l.n_out, 1, 1);
                for (int bi = 0; bi < act.b; ++bi) {
                    const double* x = act.channel(bi, 0);
                    for (int o = 0; o < l.n_out; ++o) {
                        double acc = bias ? p.b[static_cast<std::size_t>(o)] : 0.0;
                        const double* wrow = p.w.data() + static_cast<std::size_t>(o) * act.c;
                        for (int i = 0; i < act.c; ++i) acc += wrow[i] * x[i];
                        out.at(bi, o, 0, 0) = acc;
                    }
                }
                act = std::move(out);
                break;
            }
        }
        in_dims = dims[li];
    }
    (void)in_dims;

    if (cache) {
        cache->logits = act;
        cache->valid = true;
    }
    return act;
}

Gradients backward(const NetworkSpec& spec, const Weights& weights, const ForwardCache& cache,
                   const std::vector<int>& labels, double* loss_out) {
    if (!cache.valid) throw std::logic_error("reference::backward: missing forward cache");

    Gradients grads = Gradients::zeros_like(spec);
    Tensor4 grad;
    double loss = softmax_cross_entropy(cache.logits, labels, &grad);
    if (loss_out) *loss_out = loss;

    for (int li = static_cast<int>(spec.layers.size()) - 1; li >= 0; --li) {
        const Layer& l = spec.layers[static_cast<std::size_t>(li)];
        const Tensor4& in = cache.inputs[static_cast<std::size_t>(li)].values;
        switch (l.kind) {
            case LayerKind::dense: {
                const LayerParams& p = weights.params[static_cast<std::size_t>(li)];
                LayerParams& gp = grads.params[static_cast<std::size_t>(li)];
                const bool bias = !p.b.empty();
                Tensor4 din(in.b, in.c, 1, 1);
                for (int o = 0; o < grad.c; ++o) {
                    double* gw = gp.w.data() + static_cast<std::size_t>(o) * in.c;
                    double gb = 0.0;
                    for (int bi = 0; bi < in.b; ++bi) {
                        const double g = grad.at(bi, o, 0, 0);
                        gb += g;
                        const double* x = in.channel(bi, 0);
                        for (int i = 0; i < in.c; ++i) gw[i] += g * x[i];
                    }
                    if (bias) gp.b[static_cast<std::size_t>(o)] = gb;
                }
                for (int bi = 0; bi < in.b; ++bi) {
                    double* gx = din.channel(bi, 0);
                    for (int o = 0; o < grad.c; ++o) {
                        const double g = grad.at(bi, o, 0, 0);
                        const double* wrow = p.w.data() + static_cast<std::size_t>(o) * in.c;
                        for (int i = 0; i < in.c; ++i) gx[i] += wrow[i] * g;
                    }
                }
                grad = std::move(din);
                break;
            }
            case LayerKind::flatten:
                grad.c = in.c;
                grad.h = in.h;
                grad.w = in.w;
                break;
            case LayerKind::sparse_begin:
            case LayerKind::sparse_end:
                break;
            case LayerKind::relu:
                for (std::size_t i = 0; i < grad.data.size(); ++i)
                    if (in.data[i] <= 0.0) grad.data[i] = 0.0;
                break;
            case LayerKind::max_pool: {
                Tensor4 din(in.b, in.c, in.h, in.w);
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
                const LayerParams& p = weights.params[static_cast<std::size_t>(li)];
                LayerParams& gp = grads.params[static_cast<std::size_t>(li)];
                const bool bias = !p.b.empty();
                Tensor4 din(in.b, in.c, in.h, in.w);
                for (int oc = 0; oc < grad.c; ++oc) {
                    double* gw_base =
                        gp.w.data() + static_cast<std::size_t>(oc) * in.c * l.k_h * l.k_w;
                    double gb = 0.0;
                    for (int bi = 0; bi < in.b; ++bi) {
                        const double* gout = grad.channel(bi, oc);
                        for (int oy = 0; oy < grad.h; ++oy) {
                            for (int ox = 0; ox < grad.w; ++ox) {
                                const double g = gout[oy * grad.w + ox];
                                gb += g;
                                for (int ic = 0; ic < in.c; ++ic) {
                                    const double* src = in.channel(bi, ic);
                                    double* gw =
                                        gw_base + static_cast<std::size_t>(ic) * l.k_h * l.k_w;
                                    for (int ky = 0; ky < l.k_h; ++ky) {
                                        const int iy = oy * l.stride + ky - l.padding;
                                        if (iy < 0 || iy >= in.h) continue;
                                        for (int kx = 0; kx < l.k_w; ++kx) {
                                            const int ix = ox * l.stride + kx - l.padding;
                                            if (ix < 0 || ix >= in.w) continue;
                                            gw[ky * l.k_w + kx] += g * src[iy * in.w + ix];
                                        }
                                    }
                                }
                            }
                        }
                    }
                    if (bias) gp.b[static_cast<std::size_t>(oc)] = gb;
                }
                for (int bi = 0; bi < in.b; ++bi) {
                    for (int oc = 0; oc < grad.c; ++oc) {
                        const double* gout = grad.channel(bi, oc);
                        for (int oy = 0; oy < grad.h; ++oy) {
                            for (int ox = 0; ox < grad.w; ++ox) {
                                const double g = gout[oy * grad.w + ox];
                                for (int ic = 0; ic < in.c; ++ic) {
                                    double* gin = din.channel(bi, ic);
                                    const double* wrow =
                                        p.w.data() + (static_cast<std::size_t>(oc) * in.c + ic) *
                                                         l.k_h * l.k_w;
                                    for (int ky = 0; ky < l.k_h; ++ky) {
                                        const int iy = oy * l.stride + ky - l.padding;
                                        if (iy < 0 || iy >= in.h) continue;
                                        for (int kx = 0; kx < l.k_w; ++kx) {
                                            const int ix = ox * l.stride + kx - l.padding;
                                            if (ix < 0 || ix >= in.w) continue;
                                            gin[iy * in.w + ix] += wrow[ky * l.k_w + kx] * g;
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                grad = std::move(din);
                break;
            }
        }
    }
    return grads;
}

}  // namespace distreal::reference
