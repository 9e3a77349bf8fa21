#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <set>
#include <vector>

#include <Eigen/Dense>

#include "pmuev/core.hpp"

namespace pmuev {

/// One raw PMU reading as delivered by the upstream stream.
struct PmuRecord {
    std::int64_t ts_us = 0;  // microseconds UTC
    std::string pmu_id;
    double vmag_pu = 0.0;
    double vang_deg = 0.0;
    double imag_ka = 0.0;
    double iang_deg = 0.0;
    double freq_hz = 0.0;
    std::uint16_t status = 0;
};

enum class StatusCode { Good, NoData, TestMode, PmuError };

/// Decode the last two status bits.  Total function; only Good passes.
StatusCode decode_status(std::uint16_t status);

enum class RecordField { Vmag, Vang, Imag, Iang, Freq };

const char* to_string(RecordField f);

/// Fields whose values fall strictly outside the realistic closed intervals
/// vmag [0, 1.5] p.u., vang [-180, 180] deg, imag [0, 10] kA,
/// iang [-180, 180] deg, freq [59, 61] Hz.  Boundary values are kept.
std::vector<RecordField> threshold_filter(const PmuRecord& record);

/// Missing/bad entry marks per output channel, plus the set of PMUs declared
/// NA by the one-second rule.  mask true means slated for replacement.
struct QualityMask {
    int t_len = 0;
    int n_pmus = 0;
    std::vector<std::uint8_t> mask;  // [t][n][channel], same layout as tensor data
    std::set<int> na_pmus;

    bool at(int t, int n, int c) const { return mask[(static_cast<std::size_t>(t) * n_pmus + n) * kNumChannels + c] != 0; }
    void set(int t, int n, int c, bool v) { mask[(static_cast<std::size_t>(t) * n_pmus + n) * kNumChannels + c] = v ? 1 : 0; }
    void set_all_channels(int t, int n, bool v) {
        for (int c = 0; c < kNumChannels; ++c) set(t, n, c, v);
    }
    /// A reading counts as missing when any of its channels is masked.
    bool missing_reading(int t, int n) const {
        for (int c = 0; c < kNumChannels; ++c)
            if (at(t, n, c)) return true;
        return false;
    }

    static QualityMask clear(int t_len, int n_pmus);
    std::size_t masked_count() const;
};

/// Conversion of aligned per-PMU record series into a PQ|V|f tensor.
///
/// P = vmag*imag*cos(vang - iang), Q = vmag*imag*sin(vang - iang) (angles in
/// degrees), |V| = vmag, f = freq.  Entries from non-Good or threshold-flagged
/// records enter the mask: a flagged voltage or current field masks P and Q,
/// a flagged voltage field masks |V|, a flagged frequency masks f, and a
/// non-Good or absent record masks the whole reading.
struct ConversionResult {
    PqvfTensor tensor;
    QualityMask mask;
};

ConversionResult phasor_to_pqvf(const std::vector<std::vector<PmuRecord>>& per_pmu_records,
                                double rate_hz,
                                const std::vector<std::string>& pmu_ids);

/// Applies the one-second rule: a PMU with a consecutive missing-reading run
/// longer than round(rate) samples becomes NA and fully masked.
QualityMask mark_na(const QualityMask& mask, double rate_hz);

struct ImputeOptions {
    int rank = 3;
    int max_iter = 50;
    double tol = 1e-6;
};

struct MatrixCompletionResult {
    Eigen::MatrixXd completed;
    int iterations = 0;
    bool converged = false;  // false means the max_iter bound was hit
};

/// Iterative low-rank completion of one [T x N] channel matrix.  Missing
/// entries start from per-column linear interpolation (edges take the nearest
/// observed value); each iteration projects onto the top-`rank` subspace and
/// overwrites only masked entries, until the relative Frobenius change drops
/// below tol.  Observed entries are never modified.
/// The optional observer sees the completed matrix after every iteration.
MatrixCompletionResult complete_low_rank(
    const Eigen::MatrixXd& observed, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& missing,
    const ImputeOptions& options = {},
    const std::function<void(int, const Eigen::MatrixXd&)>& observer = nullptr);

struct ImputeResult {
    PqvfTensor tensor;
    bool converged = true;  // false when any channel hit max_iter
};

/// Subspace imputation over the non-NA PMUs of each channel.
/// Precondition: per-PMU missing fraction below 50% for non-NA PMUs.
ImputeResult impute_subspace(const PqvfTensor& tensor, const QualityMask& mask,
                             const ImputeOptions& options = {});

/// Copies each NA PMU's channels from the non-NA PMU with the largest
/// |correlation| in `reference_corr`; ties resolve to the lowest PMU index.
PqvfTensor fill_na_pmus(const PqvfTensor& tensor, const QualityMask& mask,
                        const Eigen::MatrixXd& reference_corr);

/// CSV stream format:
///   ts_us,pmu_id,vmag_pu,vang_deg,imag_ka,iang_deg,freq_hz,status
/// with status accepted in decimal or 0x-prefixed hex.
std::vector<PmuRecord> parse_record_csv(std::istream& in);

/// Full quality pipeline in the fixed order status -> threshold -> convert
/// (building the mask) -> mark_na -> impute -> fill.
struct QualityPipelineResult {
    PqvfTensor tensor;
    QualityMask mask;
    bool impute_converged = true;
};

QualityPipelineResult run_quality_pipeline(const std::vector<PmuRecord>& records, double rate_hz,
                                           const Eigen::MatrixXd* reference_corr = nullptr,
                                           const ImputeOptions& options = {});

}  // namespace pmuev
