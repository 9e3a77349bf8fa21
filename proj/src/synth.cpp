#include "pmuev/synth.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <string>

#include <Eigen/Cholesky>

namespace pmuev {

SynthGrid gen_grid(int n, double length_scale, std::uint64_t seed) {
    if (n < 2) throw DimensionError("need at least 2 PMUs");
    if (length_scale <= 0.0) throw ValueError("length scale must be positive");

    SynthGrid grid;
    grid.n_pmus = n;
    grid.length_scale = length_scale;
    grid.positions.resize(n, 2);
    Rng rng(mix_seed(seed, "positions"));
    for (int i = 0; i < n; ++i) {
        grid.positions(i, 0) = rng.uniform();
        grid.positions(i, 1) = rng.uniform();
    }
    grid.coupling.resize(n, n);
    for (int i = 0; i < n; ++i)
        for (int j = 0; j < n; ++j) {
            const double dist = (grid.positions.row(i) - grid.positions.row(j)).norm();
            grid.coupling(i, j) = std::exp(-dist / length_scale) + (i == j ? kKernelJitter : 0.0);
        }
    return grid;
}

std::vector<double> event_signature(const SynthGrid& grid, const EventSpec& spec, int t_len,
                                    double rate_hz) {
    const int n = grid.n_pmus;
    if (spec.epicenter < 0 || spec.epicenter >= n) throw ValueError("epicenter out of range");
    std::vector<double> sig(static_cast<std::size_t>(t_len) * n * kNumChannels, 0.0);
    auto at = [&](int t, int p, int c) -> double& {
        return sig[(static_cast<std::size_t>(t) * n + p) * kNumChannels + c];
    };
    // participation relative to the epicenter
    Eigen::VectorXd a(n);
    for (int i = 0; i < n; ++i) a(i) = grid.coupling(i, spec.epicenter) / grid.coupling(spec.epicenter, spec.epicenter);

    const int onset = static_cast<int>(std::llround(spec.onset_s * rate_hz));
    switch (spec.klass) {
        case EventClass::NonEvent:
            break;
        case EventClass::LineEvent:
            for (int t = std::max(onset, 0); t < t_len; ++t)
                for (int i = 0; i < n; ++i) {
                    const double step = spec.magnitude * a(i);
                    at(t, i, static_cast<int>(ChannelKind::P)) = step;
                    at(t, i, static_cast<int>(ChannelKind::Q)) = step;
                    at(t, i, static_cast<int>(ChannelKind::Vmag)) = step;
                }
            break;
        case EventClass::GeneratorEvent:
            for (int t = std::max(onset, 0); t < t_len; ++t) {
                const double tt = (t - onset) / rate_hz;
                const double dip =
                    -spec.magnitude * (1.0 - std::exp(-tt / spec.tau1)) * std::exp(-tt / spec.tau2);
                for (int i = 0; i < n; ++i) at(t, i, static_cast<int>(ChannelKind::Freq)) = dip;
            }
            break;
        case EventClass::OscillationEvent:
            for (int t = 0; t < t_len; ++t) {
                const double tt = t / rate_hz;
                const double wave = spec.magnitude * std::exp(-spec.osc_damping * tt) *
                                    std::sin(2.0 * std::numbers::pi * spec.osc_freq_hz * tt);
                for (int i = 0; i < n; ++i) {
                    at(t, i, static_cast<int>(ChannelKind::P)) = wave * a(i);
                    at(t, i, static_cast<int>(ChannelKind::Q)) = wave * a(i);
                    at(t, i, static_cast<int>(ChannelKind::Freq)) = wave * a(i);
                }
            }
            break;
    }
    return sig;
}

PqvfTensor gen_event_tensor(const SynthGrid& grid, const EventSpec& spec, int t_len, double rate_hz,
                            double noise_sigma, std::uint64_t seed) {
    if (t_len < rate_hz) throw ValueError("window must cover at least one second");
    if (noise_sigma < 0.0) throw ValueError("noise sigma must be nonnegative");
    const int n = grid.n_pmus;
    const auto sig = event_signature(grid, spec, t_len, rate_hz);

    std::vector<float> data(sig.size());
    if (noise_sigma == 0.0) {
        for (std::size_t k = 0; k < sig.size(); ++k) {
            const int c = static_cast<int>(k % kNumChannels);
            data[k] = static_cast<float>(kNominal[c] + sig[k]);
        }
    } else {
        const Eigen::LLT<Eigen::MatrixXd> llt(grid.coupling);
        if (llt.info() != Eigen::Success) throw ValueError("coupling kernel is not positive definite");
        const Eigen::MatrixXd chol = llt.matrixL();
        const double innov = std::sqrt(1.0 - kArCoeff * kArCoeff);

        Rng rng(mix_seed(seed, "noise"));
        Eigen::VectorXd eta(n), z(n);
        for (int c = 0; c < kNumChannels; ++c) {
            const double scale = noise_sigma * kChannelNoiseScale[c];
            for (int t = 0; t < t_len; ++t) {
                for (int i = 0; i < n; ++i) eta(i) = rng.normal();
                if (t == 0)
                    z = chol * eta;  // stationary start: z_0 ~ N(0, K)
                else
                    z = kArCoeff * z + innov * (chol * eta);
                for (int i = 0; i < n; ++i) {
                    const std::size_t k = (static_cast<std::size_t>(t) * n + i) * kNumChannels + c;
                    data[k] = static_cast<float>(kNominal[c] + scale * z(i) + sig[k]);
                }
            }
        }
    }

    PqvfTensor tensor = build_tensor(data, t_len, n, rate_hz, spec.klass);
    if (spec.klass == EventClass::LineEvent || spec.klass == EventClass::GeneratorEvent)
        tensor.event_start_index = static_cast<int>(std::llround(spec.onset_s * rate_hz));
    else if (spec.klass == EventClass::OscillationEvent)
        tensor.event_start_index = 0;
    return tensor;
}

EventSpec dataset_event_spec(const SynthGrid& grid, EventClass klass, int index, double window_s,
                             double rate_hz, std::uint64_t seed) {
    (void)rate_hz;
    Rng rng(mix_seed(seed, "event:" + std::to_string(index)));
    EventSpec spec;
    spec.klass = klass;
    switch (klass) {
        case EventClass::NonEvent:
            break;
        case EventClass::LineEvent:
            spec.epicenter = rng.uniform_int(0, grid.n_pmus - 1);
            spec.magnitude = rng.uniform(0.3, 1.0) * (rng.uniform() < 0.5 ? -1.0 : 1.0);
            spec.onset_s = window_s / 2.0;
            break;
        case EventClass::GeneratorEvent: {
            spec.epicenter = rng.uniform_int(0, grid.n_pmus - 1);
            spec.magnitude = rng.uniform(0.1, 0.5);
            spec.onset_s = window_s / 2.0;
            const auto regime = rng.uniform() < 0.5 ? kSharpRebound : kSlowDecline;
            spec.tau1 = regime.first;
            spec.tau2 = regime.second;
            break;
        }
        case EventClass::OscillationEvent:
            spec.epicenter = rng.uniform_int(0, grid.n_pmus - 1);
            spec.magnitude = rng.uniform(0.1, 0.4);
            spec.onset_s = 0.0;
            spec.osc_freq_hz = rng.uniform(0.2, 2.0);
            spec.osc_damping = rng.uniform(0.05, 0.3);
            break;
    }
    return spec;
}

std::vector<PqvfTensor> gen_dataset(const SynthGrid& grid,
                                    const std::array<int, kNumClasses>& class_counts,
                                    double window_s, double rate_hz, double noise_sigma,
                                    std::uint64_t seed) {
    for (const int c : class_counts)
        if (c < 0) throw ValueError("class counts must be nonnegative");
    const int t_len = static_cast<int>(std::llround(window_s * rate_hz));

    std::vector<PqvfTensor> out;
    int index = 0;
    for (int k = 0; k < kNumClasses; ++k) {
        const auto klass = static_cast<EventClass>(k);
        for (int i = 0; i < class_counts[k]; ++i, ++index) {
            const EventSpec spec = dataset_event_spec(grid, klass, index, window_s, rate_hz, seed);
            out.push_back(gen_event_tensor(grid, spec, t_len, rate_hz, noise_sigma,
                                           mix_seed(seed, "tensor:" + std::to_string(index))));
        }
    }
    return out;
}

std::array<double, kNumClasses> true_posterior(const PqvfTensor& tensor,
                                               const PosteriorConfig& config) {
    const int n = config.grid.n_pmus;
    const int t_len = tensor.t_len;
    if (tensor.n_pmus != n) throw UnsupportedConfig("tensor PMU count does not match the grid");
    if (tensor.sample_rate_hz != config.rate_hz) throw UnsupportedConfig("sample rate mismatch");
    if (config.candidates.empty()) throw UnsupportedConfig("no candidate signatures");
    if (config.noise_sigma < 0.0) throw UnsupportedConfig("negative noise sigma");
    for (const auto& [spec, prior] : config.candidates) {
        if (prior <= 0.0) throw UnsupportedConfig("candidate priors must be positive");
        if (spec.epicenter < 0 || spec.epicenter >= n) throw UnsupportedConfig("epicenter out of range");
    }

    const std::size_t count = config.candidates.size();
    std::vector<double> ssq(count, 0.0);  // whitened (or raw at sigma=0) residual energy

    Eigen::LLT<Eigen::MatrixXd> llt;
    if (config.noise_sigma > 0.0) {
        llt.compute(config.grid.coupling);
        if (llt.info() != Eigen::Success) throw UnsupportedConfig("coupling kernel is not positive definite");
    }
    const double innov = std::sqrt(1.0 - kArCoeff * kArCoeff);

    for (std::size_t k = 0; k < count; ++k) {
        const auto sig = event_signature(config.grid, config.candidates[k].first, t_len, config.rate_hz);
        for (int c = 0; c < kNumChannels; ++c) {
            Eigen::MatrixXd resid(t_len, n);
            for (int t = 0; t < t_len; ++t)
                for (int p = 0; p < n; ++p) {
                    const std::size_t idx = (static_cast<std::size_t>(t) * n + p) * kNumChannels + c;
                    resid(t, p) = tensor.at(t, p, c) - kNominal[c] - sig[idx];
                }
            if (config.noise_sigma == 0.0) {
                ssq[k] += resid.squaredNorm();
                continue;
            }
            resid /= config.noise_sigma * kChannelNoiseScale[c];
            // undo the AR(1) recursion, then the spatial coloring
            Eigen::MatrixXd white(t_len, n);
            white.row(0) = resid.row(0);
            for (int t = 1; t < t_len; ++t) white.row(t) = (resid.row(t) - kArCoeff * resid.row(t - 1)) / innov;
            const Eigen::MatrixXd eta = llt.matrixL().solve(white.transpose());
            ssq[k] += eta.squaredNorm();
        }
    }

    std::array<double, kNumClasses> posterior{};
    if (config.noise_sigma == 0.0) {
        // degenerate likelihood: mass on the exactly matching signatures
        const double best = *std::min_element(ssq.begin(), ssq.end());
        double total = 0.0;
        for (std::size_t k = 0; k < count; ++k)
            if (ssq[k] - best <= 1e-9 + 1e-6 * best) {
                posterior[static_cast<int>(config.candidates[k].first.klass)] += config.candidates[k].second;
                total += config.candidates[k].second;
            }
        for (auto& p : posterior) p /= total;
        return posterior;
    }

    std::vector<double> loglik(count);
    for (std::size_t k = 0; k < count; ++k)
        loglik[k] = std::log(config.candidates[k].second) - 0.5 * ssq[k];
    const double peak = *std::max_element(loglik.begin(), loglik.end());
    double total = 0.0;
    for (std::size_t k = 0; k < count; ++k) {
        const double w = std::exp(loglik[k] - peak);
        posterior[static_cast<int>(config.candidates[k].first.klass)] += w;
        total += w;
    }
    for (auto& p : posterior) p /= total;
    return posterior;
}

}  // namespace pmuev
