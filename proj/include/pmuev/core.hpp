#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "pmuev/common.hpp"

namespace pmuev {

/// The four event categories, in their stable integer encoding 0..3.
enum class EventClass : int {
    NonEvent = 0,
    LineEvent = 1,
    GeneratorEvent = 2,
    OscillationEvent = 3,
};

inline constexpr int kNumClasses = 4;

const char* to_string(EventClass c);
EventClass event_class_from_string(const std::string& s);
EventClass event_class_from_int(int v);

/// Measurement channels along tensor axis 2, in fixed order.
/// P and Q are per-unit-consistent powers, Vmag is per-unit voltage,
/// Freq is in Hz.
enum class ChannelKind : int { P = 0, Q = 1, Vmag = 2, Freq = 3 };

inline constexpr int kNumChannels = 4;

const char* to_string(ChannelKind c);

/// A time x PMU x channel block of P, Q, |V|, f measurements.
/// Data is stored time-major: index (t, n, c) -> (t*n_pmus + n)*4 + c.
struct PqvfTensor {
    int t_len = 0;
    int n_pmus = 0;
    double sample_rate_hz = 0.0;
    std::optional<EventClass> label;
    std::optional<int> event_start_index;
    std::vector<std::string> pmu_ids;
    std::vector<float> data;

    float& at(int t, int n, int c) { return data[(static_cast<std::size_t>(t) * n_pmus + n) * kNumChannels + c]; }
    float at(int t, int n, int c) const { return data[(static_cast<std::size_t>(t) * n_pmus + n) * kNumChannels + c]; }

    std::size_t size() const { return data.size(); }
};

/// Fixed-duration sub-tensor used as one classifier input sample.
struct Snapshot {
    int t_len = 0;
    int n_pmus = 0;
    double sample_rate_hz = 0.0;
    EventClass label = EventClass::NonEvent;
    int source_id = -1;  // index of the parent tensor this window was cut from
    int offset_index = 0;
    std::vector<float> data;  // same layout as PqvfTensor

    float& at(int t, int n, int c) { return data[(static_cast<std::size_t>(t) * n_pmus + n) * kNumChannels + c]; }
    float at(int t, int n, int c) const { return data[(static_cast<std::size_t>(t) * n_pmus + n) * kNumChannels + c]; }
};

/// Per-PMU-per-channel population mean and standard deviation.
struct ScalingStats {
    int n_pmus = 0;
    std::vector<double> mean;    // [n_pmus * 4]
    std::vector<double> stddev;  // [n_pmus * 4]

    double mean_at(int n, int c) const { return mean[static_cast<std::size_t>(n) * kNumChannels + c]; }
    double stddev_at(int n, int c) const { return stddev[static_cast<std::size_t>(n) * kNumChannels + c]; }

    /// Hash over the byte representation, used for provenance checks.
    std::uint64_t content_hash() const;
};

struct Dataset {
    std::vector<Snapshot> snapshots;
    std::array<int, kNumClasses> class_counts{};
    ScalingStats scaling_stats;  // computed from the training split only

    void recount();
};

/// Validates dimensions and finiteness and assembles a tensor.
/// `allow_pending_nonfinite` admits NaN/Inf values that a later quality pass
/// will impute.
PqvfTensor build_tensor(std::vector<float> raw, int t_len, int n_pmus,
                        double sample_rate_hz,
                        std::optional<EventClass> label = std::nullopt,
                        bool allow_pending_nonfinite = false,
                        std::vector<std::string> pmu_ids = {});

/// z-score per (PMU, channel): (x - mean) / (stddev + 1e-8).
Snapshot zscore_scale(const Snapshot& snapshot, const ScalingStats& stats);
PqvfTensor zscore_scale(const PqvfTensor& tensor, const ScalingStats& stats);

inline constexpr double kZscoreEpsilon = 1e-8;

/// Population moments per (PMU, channel) over all time samples of the given
/// windows.  Inputs must agree on the PMU count.
ScalingStats compute_scaling_stats(const std::vector<Snapshot>& snapshots);
ScalingStats compute_scaling_stats(const std::vector<PqvfTensor>& tensors);

// ------------------------------------------------------- container format
//
// One file per tensor:
//   bytes 0..3   magic "PQVF"
//   bytes 4..7   u32 LE header length H
//   bytes 8..8+H JSON header {version, dims, sample_rate_hz, pmu_ids,
//                             label?, event_start_index?}
//   remainder    T*N*4 little-endian IEEE-754 binary32 values, time-major
// Round trips are bit-identical.

void write_tensor_file(const PqvfTensor& tensor, const std::string& path);
PqvfTensor read_tensor_file(const std::string& path);

inline constexpr int kTensorFormatVersion = 1;

// Snapshot-set container ("PMDS"): same header+blob layout as tensor files,
// one JSON record per snapshot, data concatenated time-major. Carries the
// preprocessing provenance (applied PMU ordering + producing config hash) so
// downstream consumers can refuse mismatched model/data pairs.
struct DatasetFile {
    Dataset dataset;
    std::vector<int> ordering;  // empty = written unsorted
    std::string config_hash;
};

void write_dataset_file(const DatasetFile& file, const std::string& path);
DatasetFile read_dataset_file(const std::string& path);

inline constexpr int kDatasetFormatVersion = 1;

}  // namespace pmuev
