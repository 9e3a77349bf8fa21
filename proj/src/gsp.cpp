#include "pmuev/gsp.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <sstream>

#include <Eigen/Eigenvalues>

namespace pmuev {

std::vector<int> PmuOrdering::inverse() const {
    std::vector<int> inv(permutation.size());
    for (std::size_t k = 0; k < permutation.size(); ++k) inv[permutation[k]] = static_cast<int>(k);
    return inv;
}

Eigen::MatrixXd pairwise_correlation(const std::vector<PqvfTensor>& tensors) {
    if (tensors.empty()) throw EmptyInput("no tensors");
    const int n = tensors.front().n_pmus;
    std::size_t total_t = 0;
    for (const auto& t : tensors) {
        if (t.n_pmus != n) throw DimensionError("tensors disagree on PMU count");
        if (t.pmu_ids != tensors.front().pmu_ids) throw ValueError("tensors disagree on PMU ordering");
        total_t += static_cast<std::size_t>(t.t_len);
    }
    if (total_t < 2) throw ValueError("need at least 2 time samples");

    // per (pmu, channel) series concatenated over tensors
    std::vector<Eigen::VectorXd> series(static_cast<std::size_t>(n) * kNumChannels);
    for (auto& s : series) s.resize(static_cast<Eigen::Index>(total_t));
    std::size_t base = 0;
    for (const auto& tensor : tensors) {
        for (int t = 0; t < tensor.t_len; ++t)
            for (int p = 0; p < n; ++p)
                for (int c = 0; c < kNumChannels; ++c)
                    series[static_cast<std::size_t>(p) * kNumChannels + c](static_cast<Eigen::Index>(base + t)) =
                        tensor.at(t, p, c);
        base += static_cast<std::size_t>(tensor.t_len);
    }

    std::vector<double> mean(series.size()), norm(series.size());
    std::vector<Eigen::VectorXd> centered(series.size());
    for (std::size_t k = 0; k < series.size(); ++k) {
        mean[k] = series[k].mean();
        centered[k] = series[k].array() - mean[k];
        norm[k] = centered[k].norm();
    }

    Eigen::MatrixXd w = Eigen::MatrixXd::Zero(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = i + 1; j < n; ++j) {
            double sum = 0.0;
            int used = 0;
            for (int c = 0; c < kNumChannels; ++c) {
                const std::size_t a = static_cast<std::size_t>(i) * kNumChannels + c;
                const std::size_t b = static_cast<std::size_t>(j) * kNumChannels + c;
                if (norm[a] == 0.0 || norm[b] == 0.0) continue;  // degenerate channel
                const double r = centered[a].dot(centered[b]) / (norm[a] * norm[b]);
                sum += std::min(std::abs(r), 1.0);
                ++used;
            }
            w(i, j) = w(j, i) = used > 0 ? sum / used : 0.0;
        }
    return w;
}

CorrelationGraph build_graph(const Eigen::MatrixXd& weights) {
    const auto n = weights.rows();
    if (n != weights.cols() || n < 2) throw DimensionError("weights must be square, N >= 2");
    if ((weights - weights.transpose()).cwiseAbs().maxCoeff() > 1e-12)
        throw AsymmetryError("weight matrix is not symmetric");
    for (Eigen::Index i = 0; i < n; ++i) {
        if (weights(i, i) != 0.0) throw ValueError("weight diagonal must be zero");
        for (Eigen::Index j = 0; j < n; ++j)
            if (weights(i, j) < 0.0) throw ValueError("weights must be nonnegative");
    }
    CorrelationGraph g;
    g.weights = weights;
    g.laplacian = Eigen::MatrixXd(weights.rowwise().sum().asDiagonal()) - weights;
    return g;
}

std::vector<std::vector<int>> graph_components(const Eigen::MatrixXd& weights) {
    const int n = static_cast<int>(weights.rows());
    std::vector<int> comp(n, -1);
    int n_comp = 0;
    for (int s = 0; s < n; ++s) {
        if (comp[s] >= 0) continue;
        std::queue<int> q;
        q.push(s);
        comp[s] = n_comp;
        while (!q.empty()) {
            const int u = q.front();
            q.pop();
            for (int v = 0; v < n; ++v)
                if (comp[v] < 0 && weights(u, v) > 0.0) {
                    comp[v] = n_comp;
                    q.push(v);
                }
        }
        ++n_comp;
    }
    std::vector<std::vector<int>> out(n_comp);
    for (int i = 0; i < n; ++i) out[comp[i]].push_back(i);
    return out;
}

PmuOrdering fiedler_order(const CorrelationGraph& graph) {
    const int n = graph.size();
    if (n < 2) throw DimensionError("need at least 2 PMUs");

    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(graph.laplacian);
    if (solver.info() != Eigen::Success) throw ValueError("eigendecomposition failed");
    const double lambda2 = solver.eigenvalues()(1);
    if (lambda2 <= 1e-10) {
        const auto comps = graph_components(graph.weights);
        std::ostringstream msg;
        msg << "graph is disconnected; components:";
        for (const auto& c : comps) {
            msg << " {";
            for (std::size_t k = 0; k < c.size(); ++k) msg << (k ? "," : "") << c[k];
            msg << "}";
        }
        throw DisconnectedGraph(msg.str());
    }

    Eigen::VectorXd d = solver.eigenvectors().col(1);
    d.normalize();
    for (Eigen::Index i = 0; i < d.size(); ++i) {
        if (d(i) == 0.0) continue;
        if (d(i) < 0.0) d = -d;
        break;
    }

    PmuOrdering ordering;
    ordering.fiedler = d;
    ordering.lambda2 = lambda2;
    ordering.permutation.resize(n);
    std::iota(ordering.permutation.begin(), ordering.permutation.end(), 0);
    std::sort(ordering.permutation.begin(), ordering.permutation.end(), [&](int a, int b) {
        if (d(a) != d(b)) return d(a) < d(b);
        return a < b;
    });
    return ordering;
}

PqvfTensor apply_order(const PqvfTensor& tensor, const std::vector<int>& permutation) {
    const int n = tensor.n_pmus;
    if (static_cast<int>(permutation.size()) != n) throw LengthMismatch("permutation length mismatch");
    std::vector<bool> seen(n, false);
    for (const int p : permutation) {
        if (p < 0 || p >= n || seen[p]) throw ValueError("not a permutation");
        seen[p] = true;
    }
    PqvfTensor out = tensor;
    for (int k = 0; k < n; ++k) out.pmu_ids[k] = tensor.pmu_ids[permutation[k]];
    for (int t = 0; t < tensor.t_len; ++t)
        for (int k = 0; k < n; ++k)
            for (int c = 0; c < kNumChannels; ++c) out.at(t, k, c) = tensor.at(t, permutation[k], c);
    return out;
}

PqvfTensor apply_order(const PqvfTensor& tensor, const PmuOrdering& ordering) {
    return apply_order(tensor, ordering.permutation);
}

}  // namespace pmuev
