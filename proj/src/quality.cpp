#include "pmuev/quality.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <limits>
#include <map>
#include <sstream>

#include <Eigen/SVD>

namespace pmuev {

StatusCode decode_status(std::uint16_t status) {
    switch (status & 0x3u) {
        case 0: return StatusCode::Good;
        case 1: return StatusCode::NoData;
        case 2: return StatusCode::TestMode;
        default: return StatusCode::PmuError;
    }
}

const char* to_string(RecordField f) {
    switch (f) {
        case RecordField::Vmag: return "vmag";
        case RecordField::Vang: return "vang";
        case RecordField::Imag: return "imag";
        case RecordField::Iang: return "iang";
        case RecordField::Freq: return "freq";
    }
    throw ValueError("invalid RecordField");
}

std::vector<RecordField> threshold_filter(const PmuRecord& r) {
    std::vector<RecordField> flagged;
    if (r.vmag_pu < 0.0 || r.vmag_pu > 1.5) flagged.push_back(RecordField::Vmag);
    if (r.vang_deg < -180.0 || r.vang_deg > 180.0) flagged.push_back(RecordField::Vang);
    if (r.imag_ka < 0.0 || r.imag_ka > 10.0) flagged.push_back(RecordField::Imag);
    if (r.iang_deg < -180.0 || r.iang_deg > 180.0) flagged.push_back(RecordField::Iang);
    if (r.freq_hz < 59.0 || r.freq_hz > 61.0) flagged.push_back(RecordField::Freq);
    return flagged;
}

QualityMask QualityMask::clear(int t_len, int n_pmus) {
    QualityMask m;
    m.t_len = t_len;
    m.n_pmus = n_pmus;
    m.mask.assign(static_cast<std::size_t>(t_len) * n_pmus * kNumChannels, 0);
    return m;
}

std::size_t QualityMask::masked_count() const {
    std::size_t k = 0;
    for (const auto v : mask) k += v != 0;
    return k;
}

namespace {

constexpr double kDegToRad = 0.017453292519943295;

}  // namespace

ConversionResult phasor_to_pqvf(const std::vector<std::vector<PmuRecord>>& per_pmu_records,
                                double rate_hz, const std::vector<std::string>& pmu_ids) {
    if (rate_hz <= 0.0) throw ValueError("rate must be positive");
    const int n = static_cast<int>(per_pmu_records.size());
    if (n < 2) throw DimensionError("need at least 2 PMUs");
    if (static_cast<int>(pmu_ids.size()) != n) throw DimensionError("pmu_ids length mismatch");

    std::int64_t t0 = std::numeric_limits<std::int64_t>::max();
    std::int64_t t_max = std::numeric_limits<std::int64_t>::min();
    for (const auto& recs : per_pmu_records)
        for (const auto& r : recs) {
            t0 = std::min(t0, r.ts_us);
            t_max = std::max(t_max, r.ts_us);
        }
    if (t0 > t_max) throw EmptyInput("no records");

    const double period_us = 1e6 / rate_hz;
    const int t_len = static_cast<int>(std::llround((t_max - t0) / period_us)) + 1;

    PqvfTensor tensor;
    tensor.t_len = t_len;
    tensor.n_pmus = n;
    tensor.sample_rate_hz = rate_hz;
    tensor.pmu_ids = pmu_ids;
    tensor.data.assign(static_cast<std::size_t>(t_len) * n * kNumChannels,
                       std::numeric_limits<float>::quiet_NaN());
    QualityMask mask = QualityMask::clear(t_len, n);
    // every slot starts missing until a record lands on it
    std::fill(mask.mask.begin(), mask.mask.end(), std::uint8_t{1});

    for (int p = 0; p < n; ++p) {
        std::int64_t prev_ts = std::numeric_limits<std::int64_t>::min();
        for (const auto& r : per_pmu_records[p]) {
            if (r.ts_us <= prev_ts) throw AlignmentError("timestamps not strictly increasing for " + pmu_ids[p]);
            prev_ts = r.ts_us;
            const double exact = (r.ts_us - t0) / period_us;
            const int idx = static_cast<int>(std::llround(exact));
            if (std::abs(exact - idx) > 0.25)
                throw AlignmentError("off-grid timestamp for " + pmu_ids[p] + " at " + std::to_string(r.ts_us));
            if (!mask.missing_reading(idx, p))
                throw AlignmentError("duplicate grid slot for " + pmu_ids[p] + " at " + std::to_string(r.ts_us));

            const double delta = (r.vang_deg - r.iang_deg) * kDegToRad;
            tensor.at(idx, p, static_cast<int>(ChannelKind::P)) = static_cast<float>(r.vmag_pu * r.imag_ka * std::cos(delta));
            tensor.at(idx, p, static_cast<int>(ChannelKind::Q)) = static_cast<float>(r.vmag_pu * r.imag_ka * std::sin(delta));
            tensor.at(idx, p, static_cast<int>(ChannelKind::Vmag)) = static_cast<float>(r.vmag_pu);
            tensor.at(idx, p, static_cast<int>(ChannelKind::Freq)) = static_cast<float>(r.freq_hz);

            if (decode_status(r.status) != StatusCode::Good) continue;  // reading stays fully masked

            mask.set_all_channels(idx, p, false);
            for (const RecordField f : threshold_filter(r)) {
                switch (f) {
                    case RecordField::Vmag:
                        mask.set(idx, p, static_cast<int>(ChannelKind::P), true);
                        mask.set(idx, p, static_cast<int>(ChannelKind::Q), true);
                        mask.set(idx, p, static_cast<int>(ChannelKind::Vmag), true);
                        break;
                    case RecordField::Vang:
                    case RecordField::Imag:
                    case RecordField::Iang:
                        mask.set(idx, p, static_cast<int>(ChannelKind::P), true);
                        mask.set(idx, p, static_cast<int>(ChannelKind::Q), true);
                        break;
                    case RecordField::Freq:
                        mask.set(idx, p, static_cast<int>(ChannelKind::Freq), true);
                        break;
                }
            }
        }
    }
    return {std::move(tensor), std::move(mask)};
}

QualityMask mark_na(const QualityMask& mask, double rate_hz) {
    if (rate_hz <= 0.0) throw ValueError("rate must be positive");
    const int limit = static_cast<int>(std::llround(rate_hz));  // one second of samples
    QualityMask out = mask;
    for (int p = 0; p < mask.n_pmus; ++p) {
        int run = 0;
        bool na = false;
        for (int t = 0; t < mask.t_len; ++t) {
            run = mask.missing_reading(t, p) ? run + 1 : 0;
            if (run > limit) {
                na = true;
                break;
            }
        }
        if (na) {
            out.na_pmus.insert(p);
            for (int t = 0; t < mask.t_len; ++t) out.set_all_channels(t, p, true);
        }
    }
    return out;
}

MatrixCompletionResult complete_low_rank(
    const Eigen::MatrixXd& observed, const Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic>& missing,
    const ImputeOptions& options, const std::function<void(int, const Eigen::MatrixXd&)>& observer) {
    const auto rows = observed.rows();
    const auto cols = observed.cols();
    if (missing.rows() != rows || missing.cols() != cols) throw DimensionError("mask shape mismatch");
    if (options.rank < 1 || options.rank >= std::min(rows, cols))
        throw RankError("rank must lie in [1, min(T,N))");

    MatrixCompletionResult result;
    result.completed = observed;
    if (!missing.any()) {
        result.converged = true;
        return result;
    }

    // initialize missing entries by per-column linear interpolation in time
    for (Eigen::Index c = 0; c < cols; ++c) {
        std::vector<Eigen::Index> obs;
        for (Eigen::Index r = 0; r < rows; ++r)
            if (!missing(r, c)) obs.push_back(r);
        if (obs.empty()) throw ValueError("column " + std::to_string(c) + " has no observed entries");
        for (Eigen::Index r = 0; r < rows; ++r) {
            if (!missing(r, c)) continue;
            const auto next = std::lower_bound(obs.begin(), obs.end(), r);
            if (next == obs.begin()) {
                result.completed(r, c) = observed(obs.front(), c);
            } else if (next == obs.end()) {
                result.completed(r, c) = observed(obs.back(), c);
            } else {
                const Eigen::Index hi = *next, lo = *(next - 1);
                const double w = static_cast<double>(r - lo) / static_cast<double>(hi - lo);
                result.completed(r, c) = (1.0 - w) * observed(lo, c) + w * observed(hi, c);
            }
        }
    }

    for (int it = 1; it <= options.max_iter; ++it) {
        Eigen::BDCSVD<Eigen::MatrixXd> svd(result.completed, Eigen::ComputeThinU | Eigen::ComputeThinV);
        const Eigen::MatrixXd low_rank = svd.matrixU().leftCols(options.rank) *
                                         svd.singularValues().head(options.rank).asDiagonal() *
                                         svd.matrixV().leftCols(options.rank).transpose();
        const Eigen::MatrixXd previous = result.completed;
        for (Eigen::Index c = 0; c < cols; ++c)
            for (Eigen::Index r = 0; r < rows; ++r)
                if (missing(r, c)) result.completed(r, c) = low_rank(r, c);

        result.iterations = it;
        if (observer) observer(it, result.completed);

        const double change = (result.completed - previous).norm();
        const double scale = std::max(previous.norm(), 1e-300);
        if (change / scale < options.tol) {
            result.converged = true;
            return result;
        }
    }
    result.converged = false;  // max_iter hit
    return result;
}

ImputeResult impute_subspace(const PqvfTensor& tensor, const QualityMask& mask,
                             const ImputeOptions& options) {
    if (mask.t_len != tensor.t_len || mask.n_pmus != tensor.n_pmus)
        throw DimensionError("mask/tensor shape mismatch");

    std::vector<int> active;  // non-NA PMUs
    for (int p = 0; p < tensor.n_pmus; ++p)
        if (!mask.na_pmus.count(p)) active.push_back(p);
    if (active.empty()) throw NoDonorError("all PMUs are NA");

    for (const int p : active) {
        std::size_t miss = 0;
        for (int t = 0; t < tensor.t_len; ++t)
            for (int c = 0; c < kNumChannels; ++c) miss += mask.at(t, p, c);
        const auto total = static_cast<std::size_t>(tensor.t_len) * kNumChannels;
        if (2 * miss >= total)
            throw ValueError("PMU " + tensor.pmu_ids[p] + " misses >= 50% of its entries");
    }

    ImputeResult result{tensor, true};
    const auto n_active = static_cast<Eigen::Index>(active.size());
    for (int c = 0; c < kNumChannels; ++c) {
        Eigen::MatrixXd channel(tensor.t_len, n_active);
        Eigen::Array<bool, Eigen::Dynamic, Eigen::Dynamic> missing(tensor.t_len, n_active);
        bool any = false;
        for (Eigen::Index j = 0; j < n_active; ++j)
            for (int t = 0; t < tensor.t_len; ++t) {
                const bool m = mask.at(t, active[j], c);
                missing(t, j) = m;
                any |= m;
                channel(t, j) = m ? 0.0 : tensor.at(t, active[j], c);
            }
        if (!any) continue;
        const auto completed = complete_low_rank(channel, missing, options);
        result.converged = result.converged && completed.converged;
        for (Eigen::Index j = 0; j < n_active; ++j)
            for (int t = 0; t < tensor.t_len; ++t)
                if (missing(t, j))
                    result.tensor.at(t, active[j], c) = static_cast<float>(completed.completed(t, j));
    }
    return result;
}

PqvfTensor fill_na_pmus(const PqvfTensor& tensor, const QualityMask& mask,
                        const Eigen::MatrixXd& reference_corr) {
    if (reference_corr.rows() != tensor.n_pmus || reference_corr.cols() != tensor.n_pmus)
        throw DimensionError("reference correlation must be N x N");
    if (mask.na_pmus.empty()) return tensor;
    if (static_cast<int>(mask.na_pmus.size()) == tensor.n_pmus) throw NoDonorError("all PMUs are NA");

    PqvfTensor out = tensor;
    for (const int target : mask.na_pmus) {
        int donor = -1;
        double best = -1.0;
        for (int j = 0; j < tensor.n_pmus; ++j) {
            if (mask.na_pmus.count(j)) continue;
            const double score = std::abs(reference_corr(target, j));
            if (std::isfinite(score) && score > best) {
                best = score;
                donor = j;
            }
        }
        if (donor < 0) throw NoDonorError("no usable donor for PMU " + tensor.pmu_ids[target]);
        for (int t = 0; t < tensor.t_len; ++t)
            for (int c = 0; c < kNumChannels; ++c) out.at(t, target, c) = tensor.at(t, donor, c);
    }
    return out;
}

std::vector<PmuRecord> parse_record_csv(std::istream& in) {
    std::vector<PmuRecord> records;
    std::string line;
    if (!std::getline(in, line)) throw EmptyInput("empty record stream");
    auto strip = [](std::string s) {
        while (!s.empty() && (s.back() == '\r' || s.back() == ' ')) s.pop_back();
        std::size_t b = 0;
        while (b < s.size() && s[b] == ' ') ++b;
        return s.substr(b);
    };
    if (strip(line) != "ts_us,pmu_id,vmag_pu,vang_deg,imag_ka,iang_deg,freq_hz,status")
        throw ValueError("unexpected CSV header: " + line);

    std::size_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        std::stringstream ss(line);
        std::string field;
        std::vector<std::string> fields;
        while (std::getline(ss, field, ',')) fields.push_back(strip(field));
        if (fields.size() != 8)
            throw ValueError("line " + std::to_string(line_no) + ": expected 8 fields, got " +
                             std::to_string(fields.size()));
        PmuRecord r;
        try {
            r.ts_us = std::stoll(fields[0]);
            r.pmu_id = fields[1];
            r.vmag_pu = std::stod(fields[2]);
            r.vang_deg = std::stod(fields[3]);
            r.imag_ka = std::stod(fields[4]);
            r.iang_deg = std::stod(fields[5]);
            r.freq_hz = std::stod(fields[6]);
            const int base = fields[7].starts_with("0x") || fields[7].starts_with("0X") ? 16 : 10;
            r.status = static_cast<std::uint16_t>(std::stoul(fields[7], nullptr, base));
        } catch (const std::exception&) {
            throw ValueError("line " + std::to_string(line_no) + ": unparsable field");
        }
        records.push_back(std::move(r));
    }
    return records;
}

QualityPipelineResult run_quality_pipeline(const std::vector<PmuRecord>& records, double rate_hz,
                                           const Eigen::MatrixXd* reference_corr,
                                           const ImputeOptions& options) {
    std::vector<std::string> ids;
    std::map<std::string, int> index_of;
    for (const auto& r : records)
        if (index_of.emplace(r.pmu_id, static_cast<int>(ids.size())).second) ids.push_back(r.pmu_id);

    std::vector<std::vector<PmuRecord>> per_pmu(ids.size());
    for (const auto& r : records) per_pmu[index_of[r.pmu_id]].push_back(r);

    auto conv = phasor_to_pqvf(per_pmu, rate_hz, ids);
    QualityMask mask = mark_na(conv.mask, rate_hz);
    auto imputed = impute_subspace(conv.tensor, mask, options);

    PqvfTensor filled = imputed.tensor;
    if (!mask.na_pmus.empty()) {
        if (!reference_corr)
            throw NoDonorError("NA PMUs present but no reference correlation supplied");
        filled = fill_na_pmus(imputed.tensor, mask, *reference_corr);
    }
    return {std::move(filled), std::move(mask), imputed.converged};
}

}  // namespace pmuev
