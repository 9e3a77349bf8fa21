#pragma once

// Checkpoint container: "PMEV" magic, format version, JSON manifest, raw
// little-endian parameter blobs (value + Adam moments), trailing CRC32.

#include <string>
#include <utility>

#include <json.hpp>

#include "pmuev/nn.hpp"

namespace pmuev::nn {

inline constexpr int kCheckpointVersion = 1;

nlohmann::json net_to_json(const NetSpec& net);
NetSpec net_from_json(const nlohmann::json& j);

template <typename S>
void save_checkpoint(const std::string& path, const ParamStore<S>& params,
                     const nlohmann::json& metadata);

template <typename S>
std::pair<ParamStore<S>, nlohmann::json> load_checkpoint(const std::string& path);

// VersionError unless the checkpoint metadata carries exactly this architecture.
void require_architecture(const nlohmann::json& metadata, const NetSpec& expected);

}  // namespace pmuev::nn
