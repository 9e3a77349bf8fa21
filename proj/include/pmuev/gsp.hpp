#pragma once

// PMU sorting on the measurement correlation graph. The continuous relaxation
// of the adjacency-ordering objective is solved by the Laplacian eigenvector
// for the second-smallest eigenvalue; sorting PMUs by its components places
// strongly correlated PMUs next to each other.

#include <vector>

#include <Eigen/Dense>

#include "pmuev/common.hpp"
#include "pmuev/core.hpp"

namespace pmuev {

struct CorrelationGraph {
    Eigen::MatrixXd weights;    // symmetric, zero diagonal, entries in [0,1]
    Eigen::MatrixXd laplacian;  // D - W, positive semidefinite, rows sum to 0

    int size() const { return static_cast<int>(weights.rows()); }
    Eigen::VectorXd degrees() const { return weights.rowwise().sum(); }
};

struct PmuOrdering {
    std::vector<int> permutation;  // permutation[k] = original index at sorted position k
    Eigen::VectorXd fiedler;       // unit norm, orthogonal to 1, first nonzero component > 0
    double lambda2 = 0.0;

    std::vector<int> inverse() const;
};

// Mean of |Pearson r| per PMU pair across the four channels, over time samples
// concatenated from all tensors. A channel with zero variance on either side is
// excluded from the mean; a pair with every channel excluded gets weight 0.
Eigen::MatrixXd pairwise_correlation(const std::vector<PqvfTensor>& tensors);

CorrelationGraph build_graph(const Eigen::MatrixXd& weights);

PmuOrdering fiedler_order(const CorrelationGraph& graph);

PqvfTensor apply_order(const PqvfTensor& tensor, const PmuOrdering& ordering);
PqvfTensor apply_order(const PqvfTensor& tensor, const std::vector<int>& permutation);

// Connected components of the positive-weight edge graph, each sorted ascending.
std::vector<std::vector<int>> graph_components(const Eigen::MatrixXd& weights);

}  // namespace pmuev
