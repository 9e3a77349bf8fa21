#pragma once

// Independent oracles used by the tests: statistics utilities and a
// finite-difference gradient checker. Deliberately simple implementations so
// their correctness is inspectable at a glance.

#include <functional>
#include <vector>

#include <Eigen/Dense>

#include "pmuev/nn.hpp"

namespace pmuev::testing {

// Upper-tail probability of the chi-squared distribution with k dof.
double chi2_sf(double x, int k);

// Mean silhouette coefficient over Euclidean distances; singleton clusters
// score 0.
double silhouette(const Eigen::MatrixXd& points, const std::vector<int>& labels);

// Pearson correlation of two equal-length series.
double pearson(const std::vector<double>& a, const std::vector<double>& b);

struct GradCheckResult {
    double max_rel_err = 0.0;
    std::string worst;  // parameter name (or "input") of the worst deviation
};

// Central finite differences on an f64 network against the analytic backward
// pass. Checks every parameter (subsampled above `max_per_param` entries) and
// the input gradient.
GradCheckResult check_gradients(const nn::NetSpec& net, const nn::ParamStore<double>& params,
                                const nn::Tensor4<double>& input,
                                const nn::Tensor4<double>& out_grad, double h = 1e-5,
                                int max_per_param = 24);

}  // namespace pmuev::testing
