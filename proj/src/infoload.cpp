#include "pmuev/infoload.hpp"

#include <cmath>

namespace pmuev {

double mie_objective(const MiBatchEstimate& estimate) { return -estimate.value; }

double info_loss_total(double ce, double mi, double beta) { return ce - beta * mi; }

double binary_entropy(double p) {
    if (p < 0.0 || p > 1.0) throw DomainError("binary entropy needs p in [0,1]");
    double h = 0.0;
    if (p > 0.0) h -= p * std::log2(p);
    if (p < 1.0) h -= (1.0 - p) * std::log2(1.0 - p);
    return h;
}

double delta_tv(const std::vector<Posterior>& true_post, const std::vector<Posterior>& est_post) {
    if (true_post.empty() || true_post.size() != est_post.size())
        throw OracleUnavailable("posterior sample sets do not line up");
    double total = 0.0;
    for (std::size_t i = 0; i < true_post.size(); ++i) {
        double l1 = 0.0;
        for (int c = 0; c < kNumClasses; ++c) l1 += std::abs(true_post[i][c] - est_post[i][c]);
        total += 0.5 * l1;
    }
    return total / static_cast<double>(true_post.size());
}

double info_loss_bound(double delta, double i_xz, double epsilon) {
    if (delta < 0.0 || delta > 1.0) throw DomainError("delta must lie in [0,1]");
    if (i_xz < 0.0) throw DomainError("mutual information must be nonnegative");
    if (epsilon < 0.0) throw DomainError("epsilon must be nonnegative");
    return 2.0 * (delta * i_xz + binary_entropy(delta)) + epsilon;
}

InfoDiagnostics make_diagnostics(double delta, double i_xz_bits, double epsilon) {
    InfoDiagnostics d;
    d.delta = delta;
    d.h2_delta = binary_entropy(delta);
    d.epsilon_term = epsilon;
    d.bound_rhs = info_loss_bound(delta, i_xz_bits, epsilon);
    return d;
}

}  // namespace pmuev
