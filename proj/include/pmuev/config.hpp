#pragma once

// Run configuration: one JSON document drives synthesis, augmentation,
// training, and the ablation switches, so a single file plus a seed pins an
// entire run. Parsing is strict: unknown keys are rejected rather than
// ignored, and the schema version is checked before anything else.

#include <string>

#include "pmuev/train_eval.hpp"

namespace pmuev {

inline constexpr int kConfigSchemaVersion = 1;

struct RunConfig {
    int schema_version = kConfigSchemaVersion;

    // synth profile
    int n_pmus = 16;
    double length_scale = 0.4;
    double parent_window_s = 20.0;
    double rate_hz = 30.0;
    double noise_sigma = 1.0;
    std::array<int, kNumClasses> parent_counts = {25, 150, 17, 25};
    double test_fraction = 0.2;

    // augmentation policy
    AugmentPolicy policy;

    // training
    TrainConfig train;

    // ablation arm and experiment shape
    bool sorting = true;
    bool info = true;
    int ablation_seeds = 5;
    bool sliding = false;
};

// Strict parse: throws ValueError on malformed JSON, unknown keys, or
// out-of-range values; VersionError on a schema_version mismatch.
RunConfig parse_run_config(const std::string& json_text);

// Canonical serialization (stable key order); parse(serialize(c)) == c.
std::string run_config_to_json(const RunConfig& config);

// Hash of the canonical serialization; embedded in artifacts for provenance.
std::string config_hash(const RunConfig& config);

ExperimentProfile to_profile(const RunConfig& config);
Ablation to_ablation(const RunConfig& config);

}  // namespace pmuev
