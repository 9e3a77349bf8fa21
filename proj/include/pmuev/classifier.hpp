#pragma once

// Encoder (residual conv net over time x PMU with PQ|V|f channels, ending in a
// 10-wide representation) and estimator (dense softmax over the 4 classes).
// Convolution is 2-D over (time, PMU), which is what makes the PMU ordering
// matter: kernels share parameters across adjacent PMUs.

#include <vector>

#include "pmuev/common.hpp"
#include "pmuev/core.hpp"
#include "pmuev/nn.hpp"

namespace pmuev {

inline constexpr int kReprWidth = 10;

struct EncoderConfig {
    int t_len = 360;
    int n_pmus = 16;
    int stem_sh = 2;  // stem stride over time
    int stem_sw = 1;  // stem stride over PMUs
};

// stem 3x3x16, three residual stages (16/32/64 channels, stride-2 entry,
// 2 blocks each), global pool, dense to width 10
inline nn::NetSpec make_encoder(const EncoderConfig& cfg) {
    nn::NetSpec net;
    net.push_back(nn::Conv2dSpec{3, 3, kNumChannels, 16, cfg.stem_sh, cfg.stem_sw, 1, 1});
    net.push_back(nn::ReluSpec{});
    const int widths[3] = {16, 32, 64};
    int in_ch = 16;
    for (const int ch : widths) {
        net.push_back(nn::make_residual_block(in_ch, ch, 2));
        net.push_back(nn::make_residual_block(ch, ch, 1));
        in_ch = ch;
    }
    net.push_back(nn::GlobalAvgPoolSpec{});
    net.push_back(nn::DenseSpec{64, kReprWidth});
    nn::net_out_shape(net, {cfg.t_len, cfg.n_pmus, kNumChannels});  // validates geometry
    return net;
}

inline nn::NetSpec make_estimator() {
    return {nn::DenseSpec{kReprWidth, kNumClasses}, nn::SoftmaxSpec{}};
}

template <typename S>
struct ClassifierModel {
    nn::NetSpec encoder, estimator;
    nn::ParamStore<S> enc_params, est_params;
};

template <typename S>
ClassifierModel<S> make_classifier(const EncoderConfig& cfg, std::uint64_t seed) {
    ClassifierModel<S> model;
    model.encoder = make_encoder(cfg);
    model.estimator = make_estimator();
    model.enc_params = nn::init_params<S>(model.encoder, mix_seed(seed, "encoder"));
    model.est_params = nn::init_params<S>(model.estimator, mix_seed(seed, "estimator"));
    return model;
}

// Batch tensor from already scaled, already sorted snapshots.
template <typename S>
nn::Tensor4<S> snapshots_to_tensor(const std::vector<Snapshot>& snapshots,
                                   const std::vector<int>& indices) {
    if (indices.empty()) throw EmptyInput("empty snapshot batch");
    const auto& first = snapshots.at(indices.front());
    nn::Tensor4<S> x(static_cast<int>(indices.size()), first.t_len, first.n_pmus, kNumChannels);
    for (std::size_t b = 0; b < indices.size(); ++b) {
        const auto& s = snapshots.at(indices[b]);
        if (s.t_len != first.t_len || s.n_pmus != first.n_pmus)
            throw ShapeError("snapshots in a batch must share dims");
        const std::size_t count = s.data.size();
        for (std::size_t k = 0; k < count; ++k) x.v[b * count + k] = static_cast<S>(s.data[k]);
    }
    return x;
}

template <typename S>
nn::Tensor4<S> encode(const ClassifierModel<S>& model, const nn::Tensor4<S>& x,
                      nn::ForwardCache<S>* cache = nullptr) {
    return nn::forward(model.encoder, model.enc_params, x, cache);
}

template <typename S>
nn::Tensor4<S> classify(const ClassifierModel<S>& model, const nn::Tensor4<S>& repr,
                        nn::ForwardCache<S>* cache = nullptr) {
    if (repr.h != 1 || repr.w != 1 || repr.c != kReprWidth)
        throw ShapeError("representation must be [B,1,1,10]");
    return nn::forward(model.estimator, model.est_params, repr, cache);
}

template <typename S>
nn::Tensor4<S> predict(const ClassifierModel<S>& model, const nn::Tensor4<S>& x) {
    return classify(model, encode(model, x));
}

template <typename S>
std::vector<int> argmax_classes(const nn::Tensor4<S>& probs) {
    std::vector<int> out(probs.n);
    for (int i = 0; i < probs.n; ++i) {
        int best = 0;
        for (int k = 1; k < probs.c; ++k)
            if (probs.at(i, 0, 0, k) > probs.at(i, 0, 0, best)) best = k;
        out[i] = best;
    }
    return out;
}

}  // namespace pmuev
