#include "pmuev/config.hpp"

#include <json.hpp>

namespace pmuev {

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const char* scope, std::initializer_list<const char*> known) {
    for (const auto& [key, value] : obj.items()) {
        (void)value;
        bool ok = false;
        for (const char* k : known) ok = ok || key == k;
        if (!ok) throw ValueError(std::string("unknown config key: ") + scope + key);
    }
}

template <typename T>
void take(const json& obj, const char* key, T& out) {
    if (const auto it = obj.find(key); it != obj.end()) {
        try {
            out = it->get<T>();
        } catch (const json::exception&) {
            throw ValueError(std::string("config key has the wrong type: ") + key);
        }
    }
}

template <typename T, std::size_t N>
void take_array(const json& obj, const char* key, std::array<T, N>& out) {
    if (const auto it = obj.find(key); it != obj.end()) {
        if (!it->is_array() || it->size() != N)
            throw ValueError(std::string(key) + " must be an array of " + std::to_string(N));
        for (std::size_t i = 0; i < N; ++i) {
            try {
                out[i] = (*it)[i].get<T>();
            } catch (const json::exception&) {
                throw ValueError(std::string("config key has the wrong type: ") + key);
            }
        }
    }
}

}  // namespace

RunConfig parse_run_config(const std::string& json_text) {
    json doc;
    try {
        doc = json::parse(json_text);
    } catch (const json::exception& e) {
        throw ValueError(std::string("config is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw ValueError("config root must be an object");

    RunConfig c;
    reject_unknown(doc, "", {"schema_version", "synth", "augment", "train", "ablation"});
    take(doc, "schema_version", c.schema_version);
    if (c.schema_version != kConfigSchemaVersion)
        throw VersionError("config schema_version " + std::to_string(c.schema_version) +
                           " is not supported (expected " + std::to_string(kConfigSchemaVersion) + ")");

    if (const auto it = doc.find("synth"); it != doc.end()) {
        if (!it->is_object()) throw ValueError("synth must be an object");
        reject_unknown(*it, "synth.",
                       {"n_pmus", "length_scale", "parent_window_s", "rate_hz", "noise_sigma",
                        "parent_counts", "test_fraction"});
        take(*it, "n_pmus", c.n_pmus);
        take(*it, "length_scale", c.length_scale);
        take(*it, "parent_window_s", c.parent_window_s);
        take(*it, "rate_hz", c.rate_hz);
        take(*it, "noise_sigma", c.noise_sigma);
        take_array(*it, "parent_counts", c.parent_counts);
        take(*it, "test_fraction", c.test_fraction);
    }
    if (const auto it = doc.find("augment"); it != doc.end()) {
        if (!it->is_object()) throw ValueError("augment must be an object");
        reject_unknown(*it, "augment.", {"window_s", "per_class_samples"});
        take(*it, "window_s", c.policy.window_s);
        take_array(*it, "per_class_samples", c.policy.per_class_samples);
    }
    if (const auto it = doc.find("train"); it != doc.end()) {
        if (!it->is_object()) throw ValueError("train must be an object");
        reject_unknown(*it, "train.",
                       {"epochs", "batch_size", "lr", "beta", "seed", "folds"});
        take(*it, "epochs", c.train.epochs);
        take(*it, "batch_size", c.train.batch_size);
        take(*it, "lr", c.train.lr);
        take(*it, "beta", c.train.beta);
        take(*it, "seed", c.train.seed);
        take(*it, "folds", c.train.folds);
    }
    if (const auto it = doc.find("ablation"); it != doc.end()) {
        if (!it->is_object()) throw ValueError("ablation must be an object");
        reject_unknown(*it, "ablation.", {"sorting", "info", "ablation_seeds", "sliding"});
        take(*it, "sorting", c.sorting);
        take(*it, "info", c.info);
        take(*it, "ablation_seeds", c.ablation_seeds);
        take(*it, "sliding", c.sliding);
    }

    if (c.n_pmus < 2) throw ValueError("n_pmus must be at least 2");
    if (c.rate_hz <= 0.0 || c.parent_window_s <= 0.0) throw ValueError("rates and windows must be positive");
    if (c.noise_sigma < 0.0) throw ValueError("noise_sigma must be nonnegative");
    if (c.test_fraction <= 0.0 || c.test_fraction >= 1.0)
        throw ValueError("test_fraction must lie in (0, 1)");
    if (c.ablation_seeds < 1) throw ValueError("ablation_seeds must be positive");
    for (const int n : c.parent_counts)
        if (n < 0) throw ValueError("parent_counts must be nonnegative");
    return c;
}

std::string run_config_to_json(const RunConfig& c) {
    json doc;
    doc["schema_version"] = c.schema_version;
    doc["synth"] = {{"n_pmus", c.n_pmus},
                    {"length_scale", c.length_scale},
                    {"parent_window_s", c.parent_window_s},
                    {"rate_hz", c.rate_hz},
                    {"noise_sigma", c.noise_sigma},
                    {"parent_counts", c.parent_counts},
                    {"test_fraction", c.test_fraction}};
    doc["augment"] = {{"window_s", c.policy.window_s},
                      {"per_class_samples", c.policy.per_class_samples}};
    doc["train"] = {{"epochs", c.train.epochs},
                    {"batch_size", c.train.batch_size},
                    {"lr", c.train.lr},
                    {"beta", c.train.beta},
                    {"seed", c.train.seed},
                    {"folds", c.train.folds}};
    doc["ablation"] = {{"sorting", c.sorting},
                       {"info", c.info},
                       {"ablation_seeds", c.ablation_seeds},
                       {"sliding", c.sliding}};
    return doc.dump(2);
}

std::string config_hash(const RunConfig& config) {
    return hex64(fnv1a64(run_config_to_json(config)));
}

ExperimentProfile to_profile(const RunConfig& c) {
    ExperimentProfile p;
    p.n_pmus = c.n_pmus;
    p.length_scale = c.length_scale;
    p.parent_window_s = c.parent_window_s;
    p.rate_hz = c.rate_hz;
    p.noise_sigma = c.noise_sigma;
    p.parent_counts = c.parent_counts;
    p.test_fraction = c.test_fraction;
    p.policy = c.policy;
    p.tcfg = c.train;
    p.ablation_seeds = c.ablation_seeds;
    p.sliding = c.sliding;
    return p;
}

Ablation to_ablation(const RunConfig& c) { return {c.sorting, c.info}; }

}  // namespace pmuev
