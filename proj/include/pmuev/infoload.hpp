#pragma once

// Neural mutual-information estimation and the information-loaded loss.
// The batch estimate is joint_mean - marginal_mean, the f-divergence lower
// bound. (One published statement of the estimator joins the two means with a
// "+"; that is a typo against the bound it instantiates, and we subtract.)

#include <array>
#include <vector>

#include "pmuev/common.hpp"
#include "pmuev/core.hpp"
#include "pmuev/nn.hpp"

namespace pmuev {

inline constexpr double kMiExpClamp = 20.0;  // g is clamped here before exp(g-1)

template <typename S>
struct MieNet {
    nn::NetSpec comp;  // compresses x to a 10-dim code
    nn::NetSpec head;  // scores (code ⊕ z) with dense 200 -> 1
    nn::ParamStore<S> comp_params, head_params;
    int z_dim = 0;
};

template <typename S>
MieNet<S> make_mie_net(const std::array<int, 3>& x_shape, int z_dim, std::uint64_t seed);

struct MiBatchEstimate {
    double value = 0.0;  // nats
    int batch_size = 0;
    double joint_mean = 0.0;     // mean g on paired (x1, z1)
    double marginal_mean = 0.0;  // mean e^{g-1} on unpaired (x1, z2)
};

template <typename S>
struct MiGradients {
    MiBatchEstimate estimate;
    nn::GradStore<S> comp_grads, head_grads;  // d value / d theta
    nn::Tensor4<S> z1_grad, z2_grad;          // d value / d z inputs
};

template <typename S>
MiBatchEstimate mi_estimate(const MieNet<S>& mie, const nn::Tensor4<S>& x1,
                            const nn::Tensor4<S>& z1, const nn::Tensor4<S>& z2);

template <typename S>
MiGradients<S> mi_estimate_with_grads(const MieNet<S>& mie, const nn::Tensor4<S>& x1,
                                      const nn::Tensor4<S>& z1, const nn::Tensor4<S>& z2);

// Minimization target for theta only; the encoder sees the estimate through
// info_loss_total instead.
double mie_objective(const MiBatchEstimate& estimate);

double info_loss_total(double ce, double mi, double beta);

template <typename S>
double cross_entropy(const nn::Tensor4<S>& probs, const std::vector<int>& labels);

template <typename S>
nn::Tensor4<S> cross_entropy_grad(const nn::Tensor4<S>& probs, const std::vector<int>& labels);

double binary_entropy(double p);  // bits

using Posterior = std::array<double, kNumClasses>;
double delta_tv(const std::vector<Posterior>& true_post, const std::vector<Posterior>& est_post);

double info_loss_bound(double delta, double i_xz, double epsilon);

struct InfoDiagnostics {
    double delta = 0.0;
    double h2_delta = 0.0;  // bits
    double bound_rhs = 0.0;
    double epsilon_term = 0.0;
};

InfoDiagnostics make_diagnostics(double delta, double i_xz_bits, double epsilon);

// ---- implementation ----

template <typename S>
MieNet<S> make_mie_net(const std::array<int, 3>& x_shape, int z_dim, std::uint64_t seed) {
    if (z_dim < 1) throw ShapeError("z dimension must be >= 1");
    MieNet<S> mie;
    mie.z_dim = z_dim;
    mie.comp = {nn::Conv2dSpec{3, 3, x_shape[2], 8, 2, 2, 1, 1},
                nn::ReluSpec{},
                nn::Conv2dSpec{3, 3, 8, 16, 2, 2, 1, 1},
                nn::ReluSpec{},
                nn::Conv2dSpec{3, 3, 16, 32, 2, 2, 1, 1},
                nn::ReluSpec{},
                nn::GlobalAvgPoolSpec{},
                nn::DenseSpec{32, 10}};
    nn::net_out_shape(mie.comp, x_shape);  // validates geometry
    mie.head = {nn::DenseSpec{10 + z_dim, 200}, nn::ReluSpec{}, nn::DenseSpec{200, 1}};
    mie.comp_params = nn::init_params<S>(mie.comp, mix_seed(seed, "mie.comp"));
    mie.head_params = nn::init_params<S>(mie.head, mix_seed(seed, "mie.head"));
    return mie;
}

namespace detail {

template <typename S>
nn::Tensor4<S> concat_features(const nn::Tensor4<S>& a, const nn::Tensor4<S>& b) {
    if (a.n != b.n) throw BatchMismatch("feature batch mismatch");
    const int ca = a.h * a.w * a.c, cb = b.h * b.w * b.c;
    nn::Tensor4<S> out(a.n, 1, 1, ca + cb);
    for (int i = 0; i < a.n; ++i) {
        for (int k = 0; k < ca; ++k) out.v[static_cast<std::size_t>(i) * (ca + cb) + k] = a.v[static_cast<std::size_t>(i) * ca + k];
        for (int k = 0; k < cb; ++k) out.v[static_cast<std::size_t>(i) * (ca + cb) + ca + k] = b.v[static_cast<std::size_t>(i) * cb + k];
    }
    return out;
}

template <typename S>
void check_mi_batch(const MieNet<S>& mie, const nn::Tensor4<S>& x1, const nn::Tensor4<S>& z1,
                    const nn::Tensor4<S>& z2) {
    if (x1.n != z1.n || x1.n != z2.n) throw BatchMismatch("x1, z1, z2 batch sizes differ");
    if (z1.h * z1.w * z1.c != mie.z_dim || z2.h * z2.w * z2.c != mie.z_dim)
        throw BatchMismatch("z width does not match the estimator");
}

}  // namespace detail

template <typename S>
MiBatchEstimate mi_estimate(const MieNet<S>& mie, const nn::Tensor4<S>& x1,
                            const nn::Tensor4<S>& z1, const nn::Tensor4<S>& z2) {
    detail::check_mi_batch(mie, x1, z1, z2);
    const auto cx = nn::forward(mie.comp, mie.comp_params, x1);
    const auto gj = nn::forward(mie.head, mie.head_params, detail::concat_features(cx, z1));
    const auto gm = nn::forward(mie.head, mie.head_params, detail::concat_features(cx, z2));

    MiBatchEstimate est;
    est.batch_size = x1.n;
    double joint = 0.0, marginal = 0.0;
    for (int i = 0; i < x1.n; ++i) {
        joint += static_cast<double>(gj.v[i]);
        marginal += std::exp(std::min(static_cast<double>(gm.v[i]), kMiExpClamp) - 1.0);
    }
    est.joint_mean = joint / x1.n;
    est.marginal_mean = marginal / x1.n;
    est.value = est.joint_mean - est.marginal_mean;
    return est;
}

template <typename S>
MiGradients<S> mi_estimate_with_grads(const MieNet<S>& mie, const nn::Tensor4<S>& x1,
                                      const nn::Tensor4<S>& z1, const nn::Tensor4<S>& z2) {
    detail::check_mi_batch(mie, x1, z1, z2);
    const int b = x1.n;

    nn::ForwardCache<S> comp_cache, joint_cache, marg_cache;
    const auto cx = nn::forward(mie.comp, mie.comp_params, x1, &comp_cache);
    const auto gj = nn::forward(mie.head, mie.head_params, detail::concat_features(cx, z1), &joint_cache);
    const auto gm = nn::forward(mie.head, mie.head_params, detail::concat_features(cx, z2), &marg_cache);

    MiGradients<S> out;
    out.estimate.batch_size = b;
    nn::Tensor4<S> gj_grad(b, 1, 1, 1), gm_grad(b, 1, 1, 1);
    double joint = 0.0, marginal = 0.0;
    for (int i = 0; i < b; ++i) {
        const double g1 = static_cast<double>(gj.v[i]);
        const double g2 = static_cast<double>(gm.v[i]);
        const double e2 = std::exp(std::min(g2, kMiExpClamp) - 1.0);
        joint += g1;
        marginal += e2;
        gj_grad.v[i] = static_cast<S>(1.0 / b);
        gm_grad.v[i] = static_cast<S>(g2 < kMiExpClamp ? -e2 / b : 0.0);
    }
    out.estimate.joint_mean = joint / b;
    out.estimate.marginal_mean = marginal / b;
    out.estimate.value = out.estimate.joint_mean - out.estimate.marginal_mean;

    out.head_grads = nn::make_grads(mie.head_params);
    const auto jin_grad = nn::backward(mie.head, mie.head_params, joint_cache, gj_grad, out.head_grads);
    const auto min_grad = nn::backward(mie.head, mie.head_params, marg_cache, gm_grad, out.head_grads);

    nn::Tensor4<S> cx_grad(b, 1, 1, 10);
    out.z1_grad = nn::Tensor4<S>(z1.n, z1.h, z1.w, z1.c);
    out.z2_grad = nn::Tensor4<S>(z2.n, z2.h, z2.w, z2.c);
    const int zd = mie.z_dim;
    for (int i = 0; i < b; ++i) {
        for (int k = 0; k < 10; ++k)
            cx_grad.v[static_cast<std::size_t>(i) * 10 + k] =
                jin_grad.v[static_cast<std::size_t>(i) * (10 + zd) + k] +
                min_grad.v[static_cast<std::size_t>(i) * (10 + zd) + k];
        for (int k = 0; k < zd; ++k) {
            out.z1_grad.v[static_cast<std::size_t>(i) * zd + k] =
                jin_grad.v[static_cast<std::size_t>(i) * (10 + zd) + 10 + k];
            out.z2_grad.v[static_cast<std::size_t>(i) * zd + k] =
                min_grad.v[static_cast<std::size_t>(i) * (10 + zd) + 10 + k];
        }
    }

    out.comp_grads = nn::make_grads(mie.comp_params);
    nn::backward(mie.comp, mie.comp_params, comp_cache, cx_grad, out.comp_grads);
    return out;
}

template <typename S>
double cross_entropy(const nn::Tensor4<S>& probs, const std::vector<int>& labels) {
    if (probs.h != 1 || probs.w != 1) throw ShapeError("probabilities must be [B,1,1,K]");
    if (static_cast<std::size_t>(probs.n) != labels.size()) throw ShapeError("label count mismatch");
    double loss = 0.0;
    for (int i = 0; i < probs.n; ++i) {
        double row = 0.0;
        for (int k = 0; k < probs.c; ++k) row += static_cast<double>(probs.at(i, 0, 0, k));
        if (std::abs(row - 1.0) > 1e-6) throw ValueError("probability row does not sum to 1");
        if (labels[i] < 0 || labels[i] >= probs.c) throw ShapeError("label out of range");
        loss -= std::log(std::max(static_cast<double>(probs.at(i, 0, 0, labels[i])), 1e-12));
    }
    return loss;
}

template <typename S>
nn::Tensor4<S> cross_entropy_grad(const nn::Tensor4<S>& probs, const std::vector<int>& labels) {
    if (probs.h != 1 || probs.w != 1) throw ShapeError("probabilities must be [B,1,1,K]");
    if (static_cast<std::size_t>(probs.n) != labels.size()) throw ShapeError("label count mismatch");
    nn::Tensor4<S> grad(probs.n, 1, 1, probs.c);
    for (int i = 0; i < probs.n; ++i) {
        if (labels[i] < 0 || labels[i] >= probs.c) throw ShapeError("label out of range");
        const double p = static_cast<double>(probs.at(i, 0, 0, labels[i]));
        grad.at(i, 0, 0, labels[i]) = static_cast<S>(p > 1e-12 ? -1.0 / p : 0.0);
    }
    return grad;
}

}  // namespace pmuev
