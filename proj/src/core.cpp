#include "pmuev/core.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include <json.hpp>

namespace pmuev {

using nlohmann::json;

const char* to_string(EventClass c) {
    switch (c) {
        case EventClass::NonEvent: return "NonEvent";
        case EventClass::LineEvent: return "LineEvent";
        case EventClass::GeneratorEvent: return "GeneratorEvent";
        case EventClass::OscillationEvent: return "OscillationEvent";
    }
    throw ValueError("invalid EventClass");
}

EventClass event_class_from_string(const std::string& s) {
    for (int i = 0; i < kNumClasses; ++i) {
        const auto c = static_cast<EventClass>(i);
        if (s == to_string(c)) return c;
    }
    throw ValueError("unknown event class: " + s);
}

EventClass event_class_from_int(int v) {
    if (v < 0 || v >= kNumClasses) throw ValueError("event class id out of range: " + std::to_string(v));
    return static_cast<EventClass>(v);
}

const char* to_string(ChannelKind c) {
    switch (c) {
        case ChannelKind::P: return "P";
        case ChannelKind::Q: return "Q";
        case ChannelKind::Vmag: return "Vmag";
        case ChannelKind::Freq: return "Freq";
    }
    throw ValueError("invalid ChannelKind");
}

std::uint64_t ScalingStats::content_hash() const {
    std::string bytes;
    bytes.reserve(16 + mean.size() * 16);
    bytes.append(reinterpret_cast<const char*>(&n_pmus), sizeof(n_pmus));
    bytes.append(reinterpret_cast<const char*>(mean.data()), mean.size() * sizeof(double));
    bytes.append(reinterpret_cast<const char*>(stddev.data()), stddev.size() * sizeof(double));
    return fnv1a64(bytes);
}

void Dataset::recount() {
    class_counts.fill(0);
    for (const auto& s : snapshots) class_counts[static_cast<int>(s.label)]++;
}

PqvfTensor build_tensor(std::vector<float> raw, int t_len, int n_pmus,
                        double sample_rate_hz, std::optional<EventClass> label,
                        bool allow_pending_nonfinite,
                        std::vector<std::string> pmu_ids) {
    if (t_len < 1 || n_pmus < 2)
        throw DimensionError("tensor requires T >= 1 and N >= 2, got T=" + std::to_string(t_len) +
                             " N=" + std::to_string(n_pmus));
    if (sample_rate_hz <= 0.0) throw ValueError("sample rate must be positive");
    const std::size_t expected = static_cast<std::size_t>(t_len) * n_pmus * kNumChannels;
    if (raw.size() != expected)
        throw DimensionError("raw buffer holds " + std::to_string(raw.size()) + " values, expected T*N*4 = " +
                             std::to_string(expected) + " (axis-2 length must be exactly 4)");
    if (!allow_pending_nonfinite) {
        for (const float v : raw)
            if (!std::isfinite(v)) throw ValueError("non-finite value without pending-imputation flag");
    }
    if (!pmu_ids.empty() && static_cast<int>(pmu_ids.size()) != n_pmus)
        throw DimensionError("pmu_ids length does not match N");

    PqvfTensor out;
    out.t_len = t_len;
    out.n_pmus = n_pmus;
    out.sample_rate_hz = sample_rate_hz;
    out.label = label;
    out.data = std::move(raw);
    if (pmu_ids.empty()) {
        out.pmu_ids.reserve(n_pmus);
        for (int i = 0; i < n_pmus; ++i) out.pmu_ids.push_back("pmu" + std::to_string(i));
    } else {
        out.pmu_ids = std::move(pmu_ids);
    }
    return out;
}

namespace {

// Snapshot and PqvfTensor share the (t_len, n_pmus, at) window shape.
template <typename W>
W zscore_scale_window(const W& window, const ScalingStats& stats) {
    if (stats.n_pmus != window.n_pmus)
        throw StatsMismatch("scaling stats cover " + std::to_string(stats.n_pmus) + " PMUs, window has " +
                            std::to_string(window.n_pmus));
    W out = window;
    for (int n = 0; n < window.n_pmus; ++n) {
        for (int c = 0; c < kNumChannels; ++c) {
            const double mu = stats.mean_at(n, c);
            const double denom = stats.stddev_at(n, c) + kZscoreEpsilon;
            for (int t = 0; t < window.t_len; ++t)
                out.at(t, n, c) = static_cast<float>((window.at(t, n, c) - mu) / denom);
        }
    }
    return out;
}

}  // namespace

Snapshot zscore_scale(const Snapshot& snapshot, const ScalingStats& stats) {
    return zscore_scale_window(snapshot, stats);
}

PqvfTensor zscore_scale(const PqvfTensor& tensor, const ScalingStats& stats) {
    return zscore_scale_window(tensor, stats);
}

namespace {

template <typename W>
ScalingStats scaling_stats_of(const std::vector<W>& snapshots) {
    if (snapshots.empty()) throw EmptyInput("no snapshots to compute scaling stats from");
    const int n = snapshots.front().n_pmus;
    for (const auto& s : snapshots)
        if (s.n_pmus != n) throw StatsMismatch("snapshots disagree on PMU count");

    ScalingStats stats;
    stats.n_pmus = n;
    stats.mean.assign(static_cast<std::size_t>(n) * kNumChannels, 0.0);
    stats.stddev.assign(static_cast<std::size_t>(n) * kNumChannels, 0.0);
    std::vector<double> sum(stats.mean.size(), 0.0), sumsq(stats.mean.size(), 0.0);
    std::size_t samples = 0;
    for (const auto& s : snapshots) {
        samples += static_cast<std::size_t>(s.t_len);
        for (int t = 0; t < s.t_len; ++t)
            for (int p = 0; p < n; ++p)
                for (int c = 0; c < kNumChannels; ++c) {
                    const double v = s.at(t, p, c);
                    sum[static_cast<std::size_t>(p) * kNumChannels + c] += v;
                    sumsq[static_cast<std::size_t>(p) * kNumChannels + c] += v * v;
                }
    }
    for (std::size_t i = 0; i < stats.mean.size(); ++i) {
        const double mu = sum[i] / static_cast<double>(samples);
        const double var = std::max(0.0, sumsq[i] / static_cast<double>(samples) - mu * mu);
        stats.mean[i] = mu;
        stats.stddev[i] = std::sqrt(var);
    }
    return stats;
}

}  // namespace

ScalingStats compute_scaling_stats(const std::vector<Snapshot>& snapshots) {
    return scaling_stats_of(snapshots);
}

ScalingStats compute_scaling_stats(const std::vector<PqvfTensor>& tensors) {
    return scaling_stats_of(tensors);
}

void write_tensor_file(const PqvfTensor& tensor, const std::string& path) {
    json header{
        {"version", kTensorFormatVersion},
        {"dims", {tensor.t_len, tensor.n_pmus, kNumChannels}},
        {"sample_rate_hz", tensor.sample_rate_hz},
        {"pmu_ids", tensor.pmu_ids},
    };
    if (tensor.label) header["label"] = to_string(*tensor.label);
    if (tensor.event_start_index) header["event_start_index"] = *tensor.event_start_index;

    const std::string head = header.dump();
    const auto head_len = static_cast<std::uint32_t>(head.size());

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValueError("cannot open for writing: " + path);
    out.write("PQVF", 4);
    out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    out.write(reinterpret_cast<const char*>(tensor.data.data()),
              static_cast<std::streamsize>(tensor.data.size() * sizeof(float)));
    if (!out) throw ValueError("write failed: " + path);
}

PqvfTensor read_tensor_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValueError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PQVF", 4) != 0) throw CorruptFile("bad magic in " + path);
    std::uint32_t head_len = 0;
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    if (!in) throw CorruptFile("truncated header in " + path);
    std::string head(head_len, '\0');
    in.read(head.data(), head_len);
    if (!in) throw CorruptFile("truncated header in " + path);

    json header = json::parse(head, nullptr, false);
    if (header.is_discarded()) throw CorruptFile("unparsable header in " + path);
    if (header.at("version").get<int>() != kTensorFormatVersion)
        throw VersionError("unsupported tensor format version in " + path);

    const auto dims = header.at("dims").get<std::vector<int>>();
    if (dims.size() != 3 || dims[2] != kNumChannels) throw CorruptFile("bad dims in " + path);

    PqvfTensor tensor;
    tensor.t_len = dims[0];
    tensor.n_pmus = dims[1];
    tensor.sample_rate_hz = header.at("sample_rate_hz").get<double>();
    tensor.pmu_ids = header.at("pmu_ids").get<std::vector<std::string>>();
    if (header.contains("label")) tensor.label = event_class_from_string(header["label"].get<std::string>());
    if (header.contains("event_start_index")) tensor.event_start_index = header["event_start_index"].get<int>();

    const std::size_t count = static_cast<std::size_t>(tensor.t_len) * tensor.n_pmus * kNumChannels;
    tensor.data.resize(count);
    in.read(reinterpret_cast<char*>(tensor.data.data()), static_cast<std::streamsize>(count * sizeof(float)));
    if (!in || in.gcount() != static_cast<std::streamsize>(count * sizeof(float)))
        throw CorruptFile("truncated payload in " + path);
    return tensor;
}

void write_dataset_file(const DatasetFile& file, const std::string& path) {
    json header{{"version", kDatasetFormatVersion},
                {"ordering", file.ordering},
                {"config_hash", file.config_hash},
                {"scaling",
                 {{"n_pmus", file.dataset.scaling_stats.n_pmus},
                  {"mean", file.dataset.scaling_stats.mean},
                  {"stddev", file.dataset.scaling_stats.stddev}}}};
    json records = json::array();
    for (const auto& s : file.dataset.snapshots)
        records.push_back({{"t_len", s.t_len},
                           {"n_pmus", s.n_pmus},
                           {"sample_rate_hz", s.sample_rate_hz},
                           {"label", to_string(s.label)},
                           {"source_id", s.source_id},
                           {"offset_index", s.offset_index}});
    header["snapshots"] = std::move(records);

    const std::string head = header.dump();
    const auto head_len = static_cast<std::uint32_t>(head.size());
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValueError("cannot open for writing: " + path);
    out.write("PMDS", 4);
    out.write(reinterpret_cast<const char*>(&head_len), sizeof(head_len));
    out.write(head.data(), static_cast<std::streamsize>(head.size()));
    for (const auto& s : file.dataset.snapshots)
        out.write(reinterpret_cast<const char*>(s.data.data()),
                  static_cast<std::streamsize>(s.data.size() * sizeof(float)));
    if (!out) throw ValueError("write failed: " + path);
}

DatasetFile read_dataset_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValueError("cannot open: " + path);
    char magic[4];
    in.read(magic, 4);
    if (!in || std::memcmp(magic, "PMDS", 4) != 0) throw CorruptFile("bad magic in " + path);
    std::uint32_t head_len = 0;
    in.read(reinterpret_cast<char*>(&head_len), sizeof(head_len));
    if (!in) throw CorruptFile("truncated header in " + path);
    std::string head(head_len, '\0');
    in.read(head.data(), head_len);
    if (!in) throw CorruptFile("truncated header in " + path);

    json header = json::parse(head, nullptr, false);
    if (header.is_discarded()) throw CorruptFile("unparsable header in " + path);
    if (header.at("version").get<int>() != kDatasetFormatVersion)
        throw VersionError("unsupported dataset format version in " + path);

    DatasetFile file;
    file.ordering = header.at("ordering").get<std::vector<int>>();
    file.config_hash = header.at("config_hash").get<std::string>();
    const auto& scaling = header.at("scaling");
    file.dataset.scaling_stats.n_pmus = scaling.at("n_pmus").get<int>();
    file.dataset.scaling_stats.mean = scaling.at("mean").get<std::vector<double>>();
    file.dataset.scaling_stats.stddev = scaling.at("stddev").get<std::vector<double>>();

    for (const auto& rec : header.at("snapshots")) {
        Snapshot s;
        s.t_len = rec.at("t_len").get<int>();
        s.n_pmus = rec.at("n_pmus").get<int>();
        s.sample_rate_hz = rec.at("sample_rate_hz").get<double>();
        s.label = event_class_from_string(rec.at("label").get<std::string>());
        s.source_id = rec.at("source_id").get<int>();
        s.offset_index = rec.at("offset_index").get<int>();
        if (s.t_len < 1 || s.n_pmus < 1) throw CorruptFile("bad snapshot dims in " + path);
        const std::size_t count = static_cast<std::size_t>(s.t_len) * s.n_pmus * kNumChannels;
        s.data.resize(count);
        in.read(reinterpret_cast<char*>(s.data.data()),
                static_cast<std::streamsize>(count * sizeof(float)));
        if (!in || in.gcount() != static_cast<std::streamsize>(count * sizeof(float)))
            throw CorruptFile("truncated payload in " + path);
        file.dataset.snapshots.push_back(std::move(s));
    }
    file.dataset.recount();
    return file;
}

}  // namespace pmuev
