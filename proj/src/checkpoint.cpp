#include "pmuev/checkpoint.hpp"

#include <cstring>
#include <fstream>

#include "pmuev/common.hpp"

namespace pmuev::nn {

using nlohmann::json;

json net_to_json(const NetSpec& net) {
    json out = json::array();
    for (const auto& layer : net)
        std::visit(
            [&](const auto& spec) {
                using T = std::decay_t<decltype(spec)>;
                if constexpr (std::is_same_v<T, Conv2dSpec>) {
                    out.push_back({{"type", "conv2d"},
                                   {"kh", spec.kh},
                                   {"kw", spec.kw},
                                   {"in_ch", spec.in_ch},
                                   {"out_ch", spec.out_ch},
                                   {"sh", spec.sh},
                                   {"sw", spec.sw},
                                   {"ph", spec.ph},
                                   {"pw", spec.pw}});
                } else if constexpr (std::is_same_v<T, DenseSpec>) {
                    out.push_back({{"type", "dense"}, {"in", spec.in}, {"out", spec.out}});
                } else if constexpr (std::is_same_v<T, ReluSpec>) {
                    out.push_back({{"type", "relu"}});
                } else if constexpr (std::is_same_v<T, GlobalAvgPoolSpec>) {
                    out.push_back({{"type", "gap"}});
                } else if constexpr (std::is_same_v<T, SoftmaxSpec>) {
                    out.push_back({{"type", "softmax"}});
                } else {
                    json inner = net_to_json({spec.conv1, spec.conv2});
                    out.push_back({{"type", "residual"},
                                   {"conv1", inner[0]},
                                   {"conv2", inner[1]},
                                   {"projection", spec.projection}});
                }
            },
            layer);
    return out;
}

namespace {

Conv2dSpec conv_from_json(const json& j) {
    return {j.at("kh"), j.at("kw"), j.at("in_ch"), j.at("out_ch"),
            j.at("sh"), j.at("sw"), j.at("ph"),    j.at("pw")};
}

}  // namespace

NetSpec net_from_json(const json& j) {
    NetSpec net;
    for (const auto& layer : j) {
        const std::string type = layer.at("type");
        if (type == "conv2d") {
            net.push_back(conv_from_json(layer));
        } else if (type == "dense") {
            net.push_back(DenseSpec{layer.at("in"), layer.at("out")});
        } else if (type == "relu") {
            net.push_back(ReluSpec{});
        } else if (type == "gap") {
            net.push_back(GlobalAvgPoolSpec{});
        } else if (type == "softmax") {
            net.push_back(SoftmaxSpec{});
        } else if (type == "residual") {
            ResidualBlockSpec rb;
            rb.conv1 = conv_from_json(layer.at("conv1"));
            rb.conv2 = conv_from_json(layer.at("conv2"));
            rb.projection = layer.at("projection");
            net.push_back(rb);
        } else {
            throw VersionError("unknown layer type " + type);
        }
    }
    return net;
}

void require_architecture(const json& metadata, const NetSpec& expected) {
    if (!metadata.contains("architecture") || metadata.at("architecture") != net_to_json(expected))
        throw VersionError("checkpoint architecture does not match");
}

namespace {

template <typename T>
void append_raw(std::string& buf, const T& value) {
    buf.append(reinterpret_cast<const char*>(&value), sizeof(T));
}

template <typename S>
void append_blob(std::string& buf, const std::vector<S>& values) {
    buf.append(reinterpret_cast<const char*>(values.data()), values.size() * sizeof(S));
}

template <typename S>
const char* dtype_name() {
    return sizeof(S) == 4 ? "f32" : "f64";
}

}  // namespace

template <typename S>
void save_checkpoint(const std::string& path, const ParamStore<S>& params, const json& metadata) {
    json manifest;
    manifest["dtype"] = dtype_name<S>();
    manifest["metadata"] = metadata;
    json plist = json::array();
    for (const auto& [name, p] : params.entries)
        plist.push_back({{"name", name}, {"shape", p.shape}, {"step", p.step}});
    manifest["params"] = plist;
    const std::string mstr = manifest.dump();

    std::string buf;
    buf.append("PMEV", 4);
    append_raw(buf, static_cast<std::uint32_t>(kCheckpointVersion));
    append_raw(buf, static_cast<std::uint32_t>(mstr.size()));
    buf.append(mstr);
    for (const auto& [name, p] : params.entries) {
        append_blob(buf, p.value);
        append_blob(buf, p.m);
        append_blob(buf, p.v);
    }
    append_raw(buf, crc32(buf.data(), buf.size()));

    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw ValueError("cannot open " + path + " for writing");
    out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
    if (!out) throw ValueError("write failed for " + path);
}

template <typename S>
std::pair<ParamStore<S>, json> load_checkpoint(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ValueError("cannot open " + path);
    std::string buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());

    if (buf.size() < 16 || buf.compare(0, 4, "PMEV") != 0) throw CorruptFile("bad checkpoint magic");
    const std::uint32_t stored_crc = [&] {
        std::uint32_t v;
        std::memcpy(&v, buf.data() + buf.size() - 4, 4);
        return v;
    }();
    if (crc32(buf.data(), buf.size() - 4) != stored_crc) throw CorruptFile("checkpoint CRC mismatch");

    std::uint32_t version, mlen;
    std::memcpy(&version, buf.data() + 4, 4);
    std::memcpy(&mlen, buf.data() + 8, 4);
    if (version != static_cast<std::uint32_t>(kCheckpointVersion))
        throw VersionError("unsupported checkpoint version " + std::to_string(version));
    if (12 + static_cast<std::size_t>(mlen) + 4 > buf.size()) throw CorruptFile("truncated manifest");

    json manifest;
    try {
        manifest = json::parse(buf.substr(12, mlen));
    } catch (const json::exception&) {
        throw CorruptFile("unparsable checkpoint manifest");
    }
    if (manifest.at("dtype") != dtype_name<S>())
        throw VersionError("checkpoint dtype is " + manifest.at("dtype").get<std::string>());

    ParamStore<S> store;
    std::size_t pos = 12 + mlen;
    for (const auto& entry : manifest.at("params")) {
        Param<S> p;
        p.shape = entry.at("shape").get<std::vector<int>>();
        p.step = entry.at("step");
        std::size_t count = 1;
        for (const int d : p.shape) count *= static_cast<std::size_t>(d);
        const std::size_t bytes = count * sizeof(S);
        if (pos + 3 * bytes + 4 > buf.size()) throw CorruptFile("truncated checkpoint blobs");
        auto read_blob = [&](std::vector<S>& dst) {
            dst.resize(count);
            std::memcpy(dst.data(), buf.data() + pos, bytes);
            pos += bytes;
        };
        read_blob(p.value);
        read_blob(p.m);
        read_blob(p.v);
        store.entries.emplace(entry.at("name").get<std::string>(), std::move(p));
    }
    if (pos + 4 != buf.size()) throw CorruptFile("trailing bytes in checkpoint");
    return {std::move(store), manifest.at("metadata")};
}

template void save_checkpoint<float>(const std::string&, const ParamStore<float>&, const json&);
template void save_checkpoint<double>(const std::string&, const ParamStore<double>&, const json&);
template std::pair<ParamStore<float>, json> load_checkpoint<float>(const std::string&);
template std::pair<ParamStore<double>, json> load_checkpoint<double>(const std::string&);

}  // namespace pmuev::nn
