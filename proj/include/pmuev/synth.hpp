#pragma once

// Synthetic PQ|V|f generator with controllable spatial correlation and exact
// class posteriors. Noise is an AR(1)-in-time field of spatially correlated
// innovations, so the likelihood of any deterministic event signature is
// available in closed form for the information diagnostics.

#include <array>
#include <optional>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "pmuev/common.hpp"
#include "pmuev/core.hpp"

namespace pmuev {

inline constexpr double kArCoeff = 0.99;          // temporal AR(1) coefficient at 30 Hz
inline constexpr double kKernelJitter = 1e-9;     // diagonal jitter keeping K positive definite
inline constexpr std::array<double, kNumChannels> kNominal = {0.5, 0.1, 1.0, 60.0};
inline constexpr std::array<double, kNumChannels> kChannelNoiseScale = {0.05, 0.05, 0.01, 0.01};

struct SynthGrid {
    int n_pmus = 0;
    Eigen::MatrixXd positions;  // [N,2], unit square
    Eigen::MatrixXd coupling;   // K_ij = exp(-dist_ij / length_scale) + jitter on the diagonal
    double length_scale = 0.0;
};

struct EventSpec {
    EventClass klass = EventClass::NonEvent;
    int epicenter = 0;
    double magnitude = 0.0;
    double onset_s = 0.0;
    double tau1 = 0.25;  // generator dip attack constant (s)
    double tau2 = 1.2;   // generator dip recovery constant (s)
    double osc_freq_hz = 0.8;
    double osc_damping = 0.15;  // 1/s
};

// sharp-rebound vs slow-decline generator regimes
inline constexpr std::pair<double, double> kSharpRebound = {0.25, 1.2};
inline constexpr std::pair<double, double> kSlowDecline = {3.0, 30.0};

SynthGrid gen_grid(int n, double length_scale, std::uint64_t seed);

// Deterministic additive event signature, indexed like PqvfTensor data.
std::vector<double> event_signature(const SynthGrid& grid, const EventSpec& spec, int t_len,
                                    double rate_hz);

PqvfTensor gen_event_tensor(const SynthGrid& grid, const EventSpec& spec, int t_len, double rate_hz,
                            double noise_sigma, std::uint64_t seed);

// Tensors grouped by class in enum order; line/generator onsets at the window
// midpoint, oscillations spanning the window.
std::vector<PqvfTensor> gen_dataset(const SynthGrid& grid,
                                    const std::array<int, kNumClasses>& class_counts,
                                    double window_s, double rate_hz, double noise_sigma,
                                    std::uint64_t seed);

// The event spec drawn for tensor `index` of gen_dataset(seed), without
// generating the tensor. Lets the posterior oracle enumerate candidates.
EventSpec dataset_event_spec(const SynthGrid& grid, EventClass klass, int index, double window_s,
                             double rate_hz, std::uint64_t seed);

struct PosteriorConfig {
    SynthGrid grid;
    double rate_hz = 30.0;
    double noise_sigma = 1.0;
    std::vector<std::pair<EventSpec, double>> candidates;  // (signature, prior weight)
};

// Exact P(class | tensor) under the generative model, by whitening the
// residual against each candidate signature. All candidates share the noise
// covariance, so normalization constants cancel.
std::array<double, kNumClasses> true_posterior(const PqvfTensor& tensor,
                                               const PosteriorConfig& config);

}  // namespace pmuev
