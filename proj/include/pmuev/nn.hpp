#pragma once

// Small dense/conv network engine with reverse-mode gradients and Adam.
// Scalar type is a template parameter: float for training, double for
// finite-difference verification. All reductions run in a fixed order so
// identical inputs give bit-identical outputs.

#include <array>
#include <cstdint>
#include <map>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Dense>

#include "pmuev/common.hpp"

namespace pmuev::nn {

template <typename S>
struct Tensor4 {
    int n = 0, h = 0, w = 0, c = 0;  // batch, time, pmu, channel
    std::vector<S> v;

    Tensor4() = default;
    Tensor4(int n_, int h_, int w_, int c_) : n(n_), h(h_), w(w_), c(c_) {
        if (n < 1 || h < 1 || w < 1 || c < 1) throw ShapeError("tensor dims must be >= 1");
        v.assign(size(), S(0));
    }
    std::size_t size() const {
        return static_cast<std::size_t>(n) * h * w * static_cast<std::size_t>(c);
    }
    std::array<int, 4> shape() const { return {n, h, w, c}; }
    S& at(int i, int j, int k, int l) {
        return v[((static_cast<std::size_t>(i) * h + j) * w + k) * c + l];
    }
    S at(int i, int j, int k, int l) const {
        return v[((static_cast<std::size_t>(i) * h + j) * w + k) * c + l];
    }
};

struct Conv2dSpec {
    int kh = 3, kw = 3;
    int in_ch = 1, out_ch = 1;
    int sh = 1, sw = 1;
    int ph = 0, pw = 0;
};

struct DenseSpec {
    int in = 1, out = 1;
};

struct ReluSpec {};
struct GlobalAvgPoolSpec {};
struct SoftmaxSpec {};  // over the channel axis, per (batch, h, w)

// y = shortcut(x) + conv2(relu(conv1(x))). conv2 keeps shape; the shortcut is
// the identity unless channel count or stride changes, then a 1x1 projection.
struct ResidualBlockSpec {
    Conv2dSpec conv1, conv2;
    bool projection = false;
};

using LayerSpec =
    std::variant<Conv2dSpec, DenseSpec, ReluSpec, GlobalAvgPoolSpec, SoftmaxSpec, ResidualBlockSpec>;
using NetSpec = std::vector<LayerSpec>;

ResidualBlockSpec make_residual_block(int in_ch, int out_ch, int stride);

// {h, w, c} out of a layer given {h, w, c} in; throws ShapeError.
std::array<int, 3> layer_out_shape(const LayerSpec& layer, const std::array<int, 3>& in);
std::array<int, 3> net_out_shape(const NetSpec& net, const std::array<int, 3>& in);

struct ParamShape {
    std::string name;
    std::vector<int> shape;
};
// deterministic order: layer order, then weight before bias
std::vector<ParamShape> param_shapes(const NetSpec& net);

template <typename S>
struct Param {
    std::vector<int> shape;
    std::vector<S> value, m, v;  // value plus Adam first/second moments
    long step = 0;
};

template <typename S>
struct ParamStore {
    std::map<std::string, Param<S>> entries;  // map keeps iteration order stable

    Param<S>& at(const std::string& name) {
        const auto it = entries.find(name);
        if (it == entries.end()) throw ShapeError("unknown parameter " + name);
        return it->second;
    }
    const Param<S>& at(const std::string& name) const {
        return const_cast<ParamStore*>(this)->at(name);
    }
    std::size_t total_count() const {
        std::size_t k = 0;
        for (const auto& [name, p] : entries) k += p.value.size();
        return k;
    }
};

template <typename S>
using GradStore = std::map<std::string, std::vector<S>>;

template <typename S>
struct LayerCache {
    Tensor4<S> input;
    Tensor4<S> inner_pre;  // residual block: conv1 output before relu
    Tensor4<S> inner_act;  // residual block: relu(conv1) output
    Tensor4<S> output;     // softmax only
};

template <typename S>
struct ForwardCache {
    std::vector<LayerCache<S>> layers;
    std::array<int, 4> out_shape{};
};

// He-normal weights, zero biases; the second conv of every residual block is
// zero-initialized so blocks start as the identity.
template <typename S>
ParamStore<S> init_params(const NetSpec& net, std::uint64_t seed);

template <typename S>
GradStore<S> make_grads(const ParamStore<S>& params);

template <typename S>
Tensor4<S> forward(const NetSpec& net, const ParamStore<S>& params, const Tensor4<S>& x,
                   ForwardCache<S>* cache = nullptr);

// Returns the input gradient; parameter gradients are ACCUMULATED into grads
// so multiple loss paths can share one store.
template <typename S>
Tensor4<S> backward(const NetSpec& net, const ParamStore<S>& params, const ForwardCache<S>& cache,
                    const Tensor4<S>& grad_out, GradStore<S>& grads);

struct AdamConfig {
    double lr = 1e-3;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
};

// Bias-corrected Adam, in place; only parameters named in grads are touched.
template <typename S>
void adam_step(ParamStore<S>& params, const GradStore<S>& grads, const AdamConfig& config);

// ---- implementation ----

namespace detail {

template <typename S>
using RowMat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

inline std::array<int, 3> conv_out_shape(const Conv2dSpec& cs, const std::array<int, 3>& in) {
    if (in[2] != cs.in_ch) throw ShapeError("conv input channels mismatch");
    if (cs.kh < 1 || cs.kw < 1 || cs.sh < 1 || cs.sw < 1 || cs.ph < 0 || cs.pw < 0)
        throw ShapeError("bad conv geometry");
    const int ho = (in[0] + 2 * cs.ph - cs.kh) / cs.sh + 1;
    const int wo = (in[1] + 2 * cs.pw - cs.kw) / cs.sw + 1;
    if (ho < 1 || wo < 1 || in[0] + 2 * cs.ph < cs.kh || in[1] + 2 * cs.pw < cs.kw)
        throw ShapeError("conv kernel larger than padded input");
    return {ho, wo, cs.out_ch};
}

template <typename S>
RowMat<S> im2col(const Conv2dSpec& cs, const Tensor4<S>& x, int ho, int wo) {
    const Eigen::Index rows = static_cast<Eigen::Index>(x.n) * ho * wo;
    const Eigen::Index cols = static_cast<Eigen::Index>(cs.kh) * cs.kw * cs.in_ch;
    RowMat<S> m = RowMat<S>::Zero(rows, cols);
    for (int b = 0; b < x.n; ++b)
        for (int oh = 0; oh < ho; ++oh)
            for (int ow = 0; ow < wo; ++ow) {
                const Eigen::Index r = (static_cast<Eigen::Index>(b) * ho + oh) * wo + ow;
                for (int ki = 0; ki < cs.kh; ++ki) {
                    const int ih = oh * cs.sh - cs.ph + ki;
                    if (ih < 0 || ih >= x.h) continue;
                    for (int kj = 0; kj < cs.kw; ++kj) {
                        const int iw = ow * cs.sw - cs.pw + kj;
                        if (iw < 0 || iw >= x.w) continue;
                        for (int ci = 0; ci < cs.in_ch; ++ci)
                            m(r, (static_cast<Eigen::Index>(ki) * cs.kw + kj) * cs.in_ch + ci) =
                                x.at(b, ih, iw, ci);
                    }
                }
            }
    return m;
}

template <typename S>
Tensor4<S> conv_forward(const Conv2dSpec& cs, const Tensor4<S>& x, const Param<S>& weight,
                        const Param<S>& bias) {
    const auto out = conv_out_shape(cs, {x.h, x.w, x.c});
    const auto cols = im2col(cs, x, out[0], out[1]);
    const Eigen::Map<const RowMat<S>> wm(weight.value.data(), cols.cols(), cs.out_ch);
    Tensor4<S> y(x.n, out[0], out[1], out[2]);
    Eigen::Map<RowMat<S>> ym(y.v.data(), cols.rows(), cs.out_ch);
    ym.noalias() = cols * wm;
    const Eigen::Map<const Eigen::RowVector<S, Eigen::Dynamic>> bm(bias.value.data(), cs.out_ch);
    ym.rowwise() += bm;
    return y;
}

template <typename S>
Tensor4<S> conv_backward(const Conv2dSpec& cs, const Tensor4<S>& x, const Tensor4<S>& grad_out,
                         const Param<S>& weight, std::vector<S>& grad_w, std::vector<S>& grad_b) {
    const auto out = conv_out_shape(cs, {x.h, x.w, x.c});
    const auto cols = im2col(cs, x, out[0], out[1]);
    const Eigen::Map<const RowMat<S>> gm(grad_out.v.data(), cols.rows(), cs.out_ch);

    Eigen::Map<RowMat<S>> gw(grad_w.data(), cols.cols(), cs.out_ch);
    gw.noalias() += cols.transpose() * gm;
    Eigen::Map<Eigen::RowVector<S, Eigen::Dynamic>> gb(grad_b.data(), cs.out_ch);
    gb += gm.colwise().sum();

    const Eigen::Map<const RowMat<S>> wm(weight.value.data(), cols.cols(), cs.out_ch);
    const RowMat<S> gcols = gm * wm.transpose();

    Tensor4<S> gx(x.n, x.h, x.w, x.c);
    for (int b = 0; b < x.n; ++b)
        for (int oh = 0; oh < out[0]; ++oh)
            for (int ow = 0; ow < out[1]; ++ow) {
                const Eigen::Index r = (static_cast<Eigen::Index>(b) * out[0] + oh) * out[1] + ow;
                for (int ki = 0; ki < cs.kh; ++ki) {
                    const int ih = oh * cs.sh - cs.ph + ki;
                    if (ih < 0 || ih >= x.h) continue;
                    for (int kj = 0; kj < cs.kw; ++kj) {
                        const int iw = ow * cs.sw - cs.pw + kj;
                        if (iw < 0 || iw >= x.w) continue;
                        for (int ci = 0; ci < cs.in_ch; ++ci)
                            gx.at(b, ih, iw, ci) +=
                                gcols(r, (static_cast<Eigen::Index>(ki) * cs.kw + kj) * cs.in_ch + ci);
                    }
                }
            }
    return gx;
}

inline std::string layer_prefix(std::size_t index) { return "l" + std::to_string(index) + "."; }

}  // namespace detail

inline ResidualBlockSpec make_residual_block(int in_ch, int out_ch, int stride) {
    ResidualBlockSpec rb;
    rb.conv1 = {3, 3, in_ch, out_ch, stride, stride, 1, 1};
    rb.conv2 = {3, 3, out_ch, out_ch, 1, 1, 1, 1};
    rb.projection = in_ch != out_ch || stride != 1;
    return rb;
}

inline std::array<int, 3> layer_out_shape(const LayerSpec& layer, const std::array<int, 3>& in) {
    return std::visit(
        [&](const auto& spec) -> std::array<int, 3> {
            using T = std::decay_t<decltype(spec)>;
            if constexpr (std::is_same_v<T, Conv2dSpec>) {
                return detail::conv_out_shape(spec, in);
            } else if constexpr (std::is_same_v<T, DenseSpec>) {
                if (in[0] * in[1] * in[2] != spec.in) throw ShapeError("dense input size mismatch");
                return {1, 1, spec.out};
            } else if constexpr (std::is_same_v<T, ResidualBlockSpec>) {
                if (spec.conv2.sh != 1 || spec.conv2.sw != 1 || spec.conv2.in_ch != spec.conv1.out_ch ||
                    spec.conv2.out_ch != spec.conv1.out_ch)
                    throw ShapeError("residual conv2 must keep shape");
                const auto mid = detail::conv_out_shape(spec.conv1, in);
                const auto out = detail::conv_out_shape(spec.conv2, mid);
                const std::array<int, 3> shortcut =
                    spec.projection
                        ? detail::conv_out_shape(
                              {1, 1, spec.conv1.in_ch, spec.conv1.out_ch, spec.conv1.sh, spec.conv1.sw, 0, 0}, in)
                        : in;
                if (shortcut != out) throw ShapeError("residual shortcut shape mismatch");
                return out;
            } else if constexpr (std::is_same_v<T, GlobalAvgPoolSpec>) {
                return {1, 1, in[2]};
            } else {
                return in;  // ReLU, Softmax
            }
        },
        layer);
}

inline std::array<int, 3> net_out_shape(const NetSpec& net, const std::array<int, 3>& in) {
    auto shape = in;
    for (std::size_t i = 0; i < net.size(); ++i) {
        try {
            shape = layer_out_shape(net[i], shape);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
        }
    }
    return shape;
}

inline std::vector<ParamShape> param_shapes(const NetSpec& net) {
    std::vector<ParamShape> shapes;
    for (std::size_t i = 0; i < net.size(); ++i) {
        const auto prefix = detail::layer_prefix(i);
        std::visit(
            [&](const auto& spec) {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, Conv2dSpec>) {
                    shapes.push_back({prefix + "weight", {spec.kh, spec.kw, spec.in_ch, spec.out_ch}});
                    shapes.push_back({prefix + "bias", {spec.out_ch}});
                } else if constexpr (std::is_same_v<T, DenseSpec>) {
                    shapes.push_back({prefix + "weight", {spec.in, spec.out}});
                    shapes.push_back({prefix + "bias", {spec.out}});
                } else if constexpr (std::is_same_v<T, ResidualBlockSpec>) {
                    shapes.push_back({prefix + "conv1.weight",
                                      {spec.conv1.kh, spec.conv1.kw, spec.conv1.in_ch, spec.conv1.out_ch}});
                    shapes.push_back({prefix + "conv1.bias", {spec.conv1.out_ch}});
                    shapes.push_back({prefix + "conv2.weight",
                                      {spec.conv2.kh, spec.conv2.kw, spec.conv2.in_ch, spec.conv2.out_ch}});
                    shapes.push_back({prefix + "conv2.bias", {spec.conv2.out_ch}});
                    if (spec.projection) {
                        shapes.push_back({prefix + "proj.weight", {1, 1, spec.conv1.in_ch, spec.conv1.out_ch}});
                        shapes.push_back({prefix + "proj.bias", {spec.conv1.out_ch}});
                    }
                }
            },
            net[i]);
    }
    return shapes;
}

template <typename S>
ParamStore<S> init_params(const NetSpec& net, std::uint64_t seed) {
    Rng rng(mix_seed(seed, "init"));
    ParamStore<S> store;
    for (const auto& ps : param_shapes(net)) {
        Param<S> p;
        p.shape = ps.shape;
        std::size_t count = 1;
        for (const int d : ps.shape) count *= static_cast<std::size_t>(d);
        p.value.assign(count, S(0));
        p.m.assign(count, S(0));
        p.v.assign(count, S(0));

        const bool is_weight = ps.name.ends_with("weight");
        const bool zero_init = ps.name.find("conv2.") != std::string::npos;
        if (is_weight && !zero_init) {
            // He normal: fan_in = all dims but the last
            std::size_t fan_in = 1;
            for (std::size_t d = 0; d + 1 < ps.shape.size(); ++d)
                fan_in *= static_cast<std::size_t>(ps.shape[d]);
            const double stddev = std::sqrt(2.0 / static_cast<double>(fan_in));
            for (auto& x : p.value) x = static_cast<S>(rng.normal() * stddev);
        }
        store.entries.emplace(ps.name, std::move(p));
    }
    return store;
}

template <typename S>
GradStore<S> make_grads(const ParamStore<S>& params) {
    GradStore<S> grads;
    for (const auto& [name, p] : params.entries) grads.emplace(name, std::vector<S>(p.value.size(), S(0)));
    return grads;
}

template <typename S>
Tensor4<S> forward(const NetSpec& net, const ParamStore<S>& params, const Tensor4<S>& x,
                   ForwardCache<S>* cache) {
    if (cache) {
        cache->layers.clear();
        cache->layers.resize(net.size());
    }
    Tensor4<S> cur = x;
    for (std::size_t i = 0; i < net.size(); ++i) {
        const auto prefix = detail::layer_prefix(i);
        try {
            Tensor4<S> next = std::visit(
                [&](const auto& spec) -> Tensor4<S> {
                    using T = std::decay_t<decltype(spec)>;
                    if constexpr (std::is_same_v<T, Conv2dSpec>) {
                        if (cache) (*cache).layers[i].input = cur;
                        return detail::conv_forward(spec, cur, params.at(prefix + "weight"),
                                                    params.at(prefix + "bias"));
                    } else if constexpr (std::is_same_v<T, DenseSpec>) {
                        if (cur.h * cur.w * cur.c != spec.in) throw ShapeError("dense input size mismatch");
                        if (cache) (*cache).layers[i].input = cur;
                        const Eigen::Map<const detail::RowMat<S>> xm(cur.v.data(), cur.n, spec.in);
                        const Eigen::Map<const detail::RowMat<S>> wm(params.at(prefix + "weight").value.data(),
                                                                     spec.in, spec.out);
                        Tensor4<S> y(cur.n, 1, 1, spec.out);
                        Eigen::Map<detail::RowMat<S>> ym(y.v.data(), cur.n, spec.out);
                        ym.noalias() = xm * wm;
                        const Eigen::Map<const Eigen::RowVector<S, Eigen::Dynamic>> bm(
                            params.at(prefix + "bias").value.data(), spec.out);
                        ym.rowwise() += bm;
                        return y;
                    } else if constexpr (std::is_same_v<T, ReluSpec>) {
                        if (cache) (*cache).layers[i].input = cur;
                        Tensor4<S> y = cur;
                        for (auto& val : y.v) val = val > S(0) ? val : S(0);
                        return y;
                    } else if constexpr (std::is_same_v<T, GlobalAvgPoolSpec>) {
                        if (cache) (*cache).layers[i].input = cur;
                        Tensor4<S> y(cur.n, 1, 1, cur.c);
                        const S inv = S(1) / static_cast<S>(cur.h * cur.w);
                        for (int b = 0; b < cur.n; ++b)
                            for (int ci = 0; ci < cur.c; ++ci) {
                                S acc = S(0);
                                for (int j = 0; j < cur.h; ++j)
                                    for (int k = 0; k < cur.w; ++k) acc += cur.at(b, j, k, ci);
                                y.at(b, 0, 0, ci) = acc * inv;
                            }
                        return y;
                    } else if constexpr (std::is_same_v<T, SoftmaxSpec>) {
                        Tensor4<S> y = cur;
                        for (int b = 0; b < cur.n; ++b)
                            for (int j = 0; j < cur.h; ++j)
                                for (int k = 0; k < cur.w; ++k) {
                                    S peak = y.at(b, j, k, 0);
                                    for (int ci = 1; ci < cur.c; ++ci) peak = std::max(peak, y.at(b, j, k, ci));
                                    S total = S(0);
                                    for (int ci = 0; ci < cur.c; ++ci) {
                                        S& val = y.at(b, j, k, ci);
                                        val = std::exp(val - peak);
                                        total += val;
                                    }
                                    for (int ci = 0; ci < cur.c; ++ci) y.at(b, j, k, ci) /= total;
                                }
                        if (cache) (*cache).layers[i].output = y;
                        return y;
                    } else {  // ResidualBlockSpec
                        if (cache) (*cache).layers[i].input = cur;
                        Tensor4<S> pre = detail::conv_forward(spec.conv1, cur, params.at(prefix + "conv1.weight"),
                                                              params.at(prefix + "conv1.bias"));
                        Tensor4<S> act = pre;
                        for (auto& val : act.v) val = val > S(0) ? val : S(0);
                        Tensor4<S> y = detail::conv_forward(spec.conv2, act, params.at(prefix + "conv2.weight"),
                                                            params.at(prefix + "conv2.bias"));
                        if (spec.projection) {
                            const Conv2dSpec pc{1, 1, spec.conv1.in_ch, spec.conv1.out_ch,
                                                spec.conv1.sh, spec.conv1.sw, 0, 0};
                            const Tensor4<S> sc = detail::conv_forward(pc, cur, params.at(prefix + "proj.weight"),
                                                                       params.at(prefix + "proj.bias"));
                            for (std::size_t k = 0; k < y.v.size(); ++k) y.v[k] += sc.v[k];
                        } else {
                            if (y.v.size() != cur.v.size()) throw ShapeError("residual shortcut shape mismatch");
                            for (std::size_t k = 0; k < y.v.size(); ++k) y.v[k] += cur.v[k];
                        }
                        if (cache) {
                            (*cache).layers[i].inner_pre = std::move(pre);
                            (*cache).layers[i].inner_act = std::move(act);
                        }
                        return y;
                    }
                },
                net[i]);
            cur = std::move(next);
        } catch (const ShapeError& e) {
            throw ShapeError("layer " + std::to_string(i) + ": " + e.what());
        }
    }
    if (cache) cache->out_shape = cur.shape();
    return cur;
}

template <typename S>
Tensor4<S> backward(const NetSpec& net, const ParamStore<S>& params, const ForwardCache<S>& cache,
                    const Tensor4<S>& grad_out, GradStore<S>& grads) {
    if (cache.layers.size() != net.size()) throw CacheMismatch("cache does not match the network");
    if (grad_out.shape() != cache.out_shape) throw CacheMismatch("output gradient shape mismatch");

    Tensor4<S> grad = grad_out;
    for (std::size_t idx = net.size(); idx-- > 0;) {
        const auto prefix = detail::layer_prefix(idx);
        const auto& lc = cache.layers[idx];
        grad = std::visit(
            [&](const auto& spec) -> Tensor4<S> {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, Conv2dSpec>) {
                    return detail::conv_backward(spec, lc.input, grad, params.at(prefix + "weight"),
                                                 grads.at(prefix + "weight"), grads.at(prefix + "bias"));
                } else if constexpr (std::is_same_v<T, DenseSpec>) {
                    const auto& x = lc.input;
                    const Eigen::Map<const detail::RowMat<S>> xm(x.v.data(), x.n, spec.in);
                    const Eigen::Map<const detail::RowMat<S>> gm(grad.v.data(), x.n, spec.out);
                    Eigen::Map<detail::RowMat<S>> gw(grads.at(prefix + "weight").data(), spec.in, spec.out);
                    gw.noalias() += xm.transpose() * gm;
                    Eigen::Map<Eigen::RowVector<S, Eigen::Dynamic>> gb(grads.at(prefix + "bias").data(), spec.out);
                    gb += gm.colwise().sum();
                    const Eigen::Map<const detail::RowMat<S>> wm(params.at(prefix + "weight").value.data(),
                                                                 spec.in, spec.out);
                    Tensor4<S> gx(x.n, x.h, x.w, x.c);
                    Eigen::Map<detail::RowMat<S>> gxm(gx.v.data(), x.n, spec.in);
                    gxm.noalias() = gm * wm.transpose();
                    return gx;
                } else if constexpr (std::is_same_v<T, ReluSpec>) {
                    Tensor4<S> gx = grad;
                    for (std::size_t k = 0; k < gx.v.size(); ++k)
                        if (lc.input.v[k] <= S(0)) gx.v[k] = S(0);
                    return gx;
                } else if constexpr (std::is_same_v<T, GlobalAvgPoolSpec>) {
                    const auto& in = lc.input;
                    Tensor4<S> gx(in.n, in.h, in.w, in.c);
                    const S inv = S(1) / static_cast<S>(in.h * in.w);
                    for (int b = 0; b < in.n; ++b)
                        for (int ci = 0; ci < in.c; ++ci) {
                            const S g = grad.at(b, 0, 0, ci) * inv;
                            for (int j = 0; j < in.h; ++j)
                                for (int k = 0; k < in.w; ++k) gx.at(b, j, k, ci) = g;
                        }
                    return gx;
                } else if constexpr (std::is_same_v<T, SoftmaxSpec>) {
                    const auto& y = lc.output;
                    Tensor4<S> gx(y.n, y.h, y.w, y.c);
                    for (int b = 0; b < y.n; ++b)
                        for (int j = 0; j < y.h; ++j)
                            for (int k = 0; k < y.w; ++k) {
                                S dot = S(0);
                                for (int ci = 0; ci < y.c; ++ci) dot += grad.at(b, j, k, ci) * y.at(b, j, k, ci);
                                for (int ci = 0; ci < y.c; ++ci)
                                    gx.at(b, j, k, ci) = y.at(b, j, k, ci) * (grad.at(b, j, k, ci) - dot);
                            }
                    return gx;
                } else {  // ResidualBlockSpec
                    Tensor4<S> g_act =
                        detail::conv_backward(spec.conv2, lc.inner_act, grad, params.at(prefix + "conv2.weight"),
                                              grads.at(prefix + "conv2.weight"), grads.at(prefix + "conv2.bias"));
                    for (std::size_t k = 0; k < g_act.v.size(); ++k)
                        if (lc.inner_pre.v[k] <= S(0)) g_act.v[k] = S(0);
                    Tensor4<S> gx =
                        detail::conv_backward(spec.conv1, lc.input, g_act, params.at(prefix + "conv1.weight"),
                                              grads.at(prefix + "conv1.weight"), grads.at(prefix + "conv1.bias"));
                    if (spec.projection) {
                        const Conv2dSpec pc{1, 1, spec.conv1.in_ch, spec.conv1.out_ch,
                                            spec.conv1.sh, spec.conv1.sw, 0, 0};
                        const Tensor4<S> g_sc =
                            detail::conv_backward(pc, lc.input, grad, params.at(prefix + "proj.weight"),
                                                  grads.at(prefix + "proj.weight"), grads.at(prefix + "proj.bias"));
                        for (std::size_t k = 0; k < gx.v.size(); ++k) gx.v[k] += g_sc.v[k];
                    } else {
                        for (std::size_t k = 0; k < gx.v.size(); ++k) gx.v[k] += grad.v[k];
                    }
                    return gx;
                }
            },
            net[idx]);
    }
    return grad;
}

template <typename S>
void adam_step(ParamStore<S>& params, const GradStore<S>& grads, const AdamConfig& config) {
    for (const auto& [name, g] : grads) {
        Param<S>& p = params.at(name);
        if (g.size() != p.value.size()) throw ShapeError("gradient size mismatch for " + name);
        p.step += 1;
        const double bc1 = 1.0 - std::pow(config.beta1, static_cast<double>(p.step));
        const double bc2 = 1.0 - std::pow(config.beta2, static_cast<double>(p.step));
        for (std::size_t k = 0; k < g.size(); ++k) {
            const double gk = static_cast<double>(g[k]);
            const double m = config.beta1 * static_cast<double>(p.m[k]) + (1.0 - config.beta1) * gk;
            const double v = config.beta2 * static_cast<double>(p.v[k]) + (1.0 - config.beta2) * gk * gk;
            p.m[k] = static_cast<S>(m);
            p.v[k] = static_cast<S>(v);
            p.value[k] -= static_cast<S>(config.lr * (m / bc1) / (std::sqrt(v / bc2) + config.eps));
        }
    }
}

}  // namespace pmuev::nn
