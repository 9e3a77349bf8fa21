#include "pmuev/train_eval.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <exception>
#include <functional>
#include <numeric>
#include <sstream>
#include <thread>

#include <json.hpp>

#include "pmuev/checkpoint.hpp"

namespace pmuev {

namespace {

std::vector<int> identity_permutation(int n) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    return p;
}

void check_train_config(const TrainConfig& c) {
    if (c.epochs < 1 || c.batch_size < 1) throw ValueError("epochs and batch size must be positive");
    if (c.lr <= 0.0) throw ValueError("learning rate must be positive");
    if (c.beta < 0.0) throw ValueError("beta must be nonnegative");
}

template <typename S>
void negate(nn::GradStore<S>& grads) {
    for (auto& [name, g] : grads)
        for (auto& v : g) v = -v;
}

}  // namespace

TrainResult train(const Dataset& train_set, const TrainConfig& config, const Ablation& ablation) {
    check_train_config(config);
    const auto& snaps = train_set.snapshots;
    if (snaps.empty()) throw EmptyInput("no training snapshots");
    const int n = static_cast<int>(snaps.size());
    const int t_len = snaps.front().t_len;
    const int n_pmus = snaps.front().n_pmus;

    TrainResult result;
    result.bundle.config = config;
    result.bundle.ablation = ablation;
    result.bundle.ordering = identity_permutation(n_pmus);
    result.bundle.stats = train_set.scaling_stats;
    result.bundle.model =
        make_classifier<float>({t_len, n_pmus, 2, 1}, mix_seed(config.seed, "model"));
    auto& model = result.bundle.model;
    if (ablation.info)
        result.bundle.mie =
            make_mie_net<float>({t_len, n_pmus, kNumChannels}, kReprWidth, mix_seed(config.seed, "mie"));

    Rng batch_rng(mix_seed(config.seed, "batch"));
    Rng x2_rng(mix_seed(config.seed, "x2"));
    const nn::AdamConfig adam{config.lr, 0.9, 0.999, 1e-8};

    std::vector<int> order(snaps.size());
    std::iota(order.begin(), order.end(), 0);

    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        batch_rng.shuffle(order);
        double ce_sum = 0.0, mi_sum = 0.0, loss_sum = 0.0;
        long correct = 0;
        int steps = 0;

        for (int begin = 0; begin < n; begin += config.batch_size, ++steps) {
            const int end = std::min(begin + config.batch_size, n);
            const std::vector<int> batch(order.begin() + begin, order.begin() + end);
            const int b = static_cast<int>(batch.size());

            auto x1 = snapshots_to_tensor<float>(snaps, batch);
            std::vector<int> labels(batch.size());
            for (std::size_t i = 0; i < batch.size(); ++i)
                labels[i] = static_cast<int>(snaps[batch[i]].label);

            nn::ForwardCache<float> enc_cache, est_cache;
            const auto z1 = encode(model, x1, &enc_cache);
            const auto probs = classify(model, z1, &est_cache);
            const double ce = cross_entropy(probs, labels);
            if (!std::isfinite(ce))
                throw DivergenceError("cross entropy diverged at epoch " + std::to_string(epoch) +
                                      " step " + std::to_string(steps));

            auto est_grads = nn::make_grads(model.est_params);
            auto repr_grad = nn::backward(model.estimator, model.est_params, est_cache,
                                          cross_entropy_grad(probs, labels), est_grads);
            auto enc_grads = nn::make_grads(model.enc_params);

            double mi_val = 0.0;
            if (ablation.info) {
                std::vector<int> batch2(batch.size());
                for (auto& idx : batch2) idx = static_cast<int>(x2_rng.uniform_int(0, n - 1));
                auto x2 = snapshots_to_tensor<float>(snaps, batch2);
                nn::ForwardCache<float> enc2_cache;
                const auto z2 = encode(model, x2, &enc2_cache);

                auto& mie = *result.bundle.mie;
                // MIE ascends its own objective first, on the current encoder
                auto step1 = mi_estimate_with_grads(mie, x1, z1, z2);
                if (!std::isfinite(step1.estimate.value))
                    throw DivergenceError("MI estimate diverged at epoch " + std::to_string(epoch) +
                                          " step " + std::to_string(steps));
                negate(step1.comp_grads);
                negate(step1.head_grads);
                nn::adam_step(mie.comp_params, step1.comp_grads, adam);
                nn::adam_step(mie.head_params, step1.head_grads, adam);

                // the encoder regularizer uses the updated estimator
                auto step2 = mi_estimate_with_grads(mie, x1, z1, z2);
                mi_val = step2.estimate.value;
                const auto beta = static_cast<float>(config.beta);
                for (std::size_t k = 0; k < repr_grad.v.size(); ++k)
                    repr_grad.v[k] -= beta * step2.z1_grad.v[k];
                for (auto& g : step2.z2_grad.v) g *= -beta;
                nn::backward(model.encoder, model.enc_params, enc2_cache, step2.z2_grad, enc_grads);
            }

            nn::backward(model.encoder, model.enc_params, enc_cache, repr_grad, enc_grads);
            nn::adam_step(model.est_params, est_grads, adam);
            nn::adam_step(model.enc_params, enc_grads, adam);

            ce_sum += ce;
            mi_sum += mi_val;
            loss_sum += info_loss_total(ce, mi_val, ablation.info ? config.beta : 0.0);
            const auto pred = argmax_classes(probs);
            for (int i = 0; i < b; ++i) correct += pred[i] == labels[i];
        }

        EpochDiagnostics diag;
        diag.epoch = epoch;
        diag.ce = ce_sum / n;
        diag.mi_nats = steps > 0 ? mi_sum / steps : 0.0;
        diag.loss = steps > 0 ? loss_sum / steps : 0.0;
        diag.train_accuracy = static_cast<double>(correct) / n;
        result.epochs.push_back(diag);
    }
    return result;
}

namespace {

void merge_params(nn::ParamStore<float>& dst, const nn::ParamStore<float>& src,
                  const std::string& prefix) {
    for (const auto& [name, p] : src.entries) dst.entries[prefix + name] = p;
}

nn::ParamStore<float> split_params(const nn::ParamStore<float>& all, const std::string& prefix) {
    nn::ParamStore<float> out;
    for (const auto& [name, p] : all.entries)
        if (name.rfind(prefix, 0) == 0) out.entries[name.substr(prefix.size())] = p;
    return out;
}

}  // namespace

void save_bundle(const ModelBundle& bundle, const std::string& path,
                 const std::string& config_hash) {
    nn::ParamStore<float> all;
    merge_params(all, bundle.model.enc_params, "enc.");
    merge_params(all, bundle.model.est_params, "est.");
    if (bundle.mie) {
        merge_params(all, bundle.mie->comp_params, "miec.");
        merge_params(all, bundle.mie->head_params, "mieh.");
    }

    nlohmann::json meta;
    meta["kind"] = "pmuev.model";
    meta["encoder"] = nn::net_to_json(bundle.model.encoder);
    meta["estimator"] = nn::net_to_json(bundle.model.estimator);
    if (bundle.mie) {
        meta["mie_comp"] = nn::net_to_json(bundle.mie->comp);
        meta["mie_head"] = nn::net_to_json(bundle.mie->head);
        meta["mie_z_dim"] = bundle.mie->z_dim;
    }
    meta["ordering"] = bundle.ordering;
    meta["scaling"] = {{"n_pmus", bundle.stats.n_pmus},
                       {"mean", bundle.stats.mean},
                       {"stddev", bundle.stats.stddev}};
    meta["train"] = {{"epochs", bundle.config.epochs}, {"batch_size", bundle.config.batch_size},
                     {"lr", bundle.config.lr},         {"beta", bundle.config.beta},
                     {"seed", bundle.config.seed},     {"folds", bundle.config.folds}};
    meta["ablation"] = {{"sorting", bundle.ablation.sorting}, {"info", bundle.ablation.info}};
    meta["config_hash"] = config_hash.empty() ? bundle.config_hash : config_hash;
    nn::save_checkpoint(path, all, meta);
}

ModelBundle load_bundle(const std::string& path) {
    auto [all, meta] = nn::load_checkpoint<float>(path);
    if (!meta.contains("kind") || meta["kind"] != "pmuev.model")
        throw VersionError("checkpoint does not hold a model bundle");

    ModelBundle bundle;
    bundle.model.encoder = nn::net_from_json(meta.at("encoder"));
    bundle.model.estimator = nn::net_from_json(meta.at("estimator"));
    bundle.model.enc_params = split_params(all, "enc.");
    bundle.model.est_params = split_params(all, "est.");
    if (meta.contains("mie_comp")) {
        MieNet<float> mie;
        mie.comp = nn::net_from_json(meta.at("mie_comp"));
        mie.head = nn::net_from_json(meta.at("mie_head"));
        mie.z_dim = meta.at("mie_z_dim").get<int>();
        mie.comp_params = split_params(all, "miec.");
        mie.head_params = split_params(all, "mieh.");
        bundle.mie = std::move(mie);
    }
    bundle.ordering = meta.at("ordering").get<std::vector<int>>();
    const auto& scaling = meta.at("scaling");
    bundle.stats.n_pmus = scaling.at("n_pmus").get<int>();
    bundle.stats.mean = scaling.at("mean").get<std::vector<double>>();
    bundle.stats.stddev = scaling.at("stddev").get<std::vector<double>>();
    const auto& train = meta.at("train");
    bundle.config.epochs = train.at("epochs").get<int>();
    bundle.config.batch_size = train.at("batch_size").get<int>();
    bundle.config.lr = train.at("lr").get<double>();
    bundle.config.beta = train.at("beta").get<double>();
    bundle.config.seed = train.at("seed").get<std::uint64_t>();
    bundle.config.folds = train.at("folds").get<int>();
    bundle.ablation.sorting = meta.at("ablation").at("sorting").get<bool>();
    bundle.ablation.info = meta.at("ablation").at("info").get<bool>();
    bundle.config_hash = meta.value("config_hash", "");
    return bundle;
}

F1Result f1_scores(const std::vector<int>& predictions, const std::vector<int>& labels) {
    if (labels.empty()) throw EmptyInput("no labels");
    if (predictions.size() != labels.size()) throw ValueError("prediction/label length mismatch");

    F1Result r;
    long correct = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        if (labels[i] < 0 || labels[i] >= kNumClasses || predictions[i] < 0 || predictions[i] >= kNumClasses)
            throw ValueError("class id out of range");
        r.confusion[labels[i]][predictions[i]] += 1;
        correct += predictions[i] == labels[i];
    }
    r.accuracy = static_cast<double>(correct) / static_cast<double>(labels.size());

    double macro = 0.0;
    for (int c = 0; c < kNumClasses; ++c) {
        long tp = r.confusion[c][c], fp = 0, fn = 0;
        for (int o = 0; o < kNumClasses; ++o) {
            if (o == c) continue;
            fp += r.confusion[o][c];
            fn += r.confusion[c][o];
        }
        const double precision = tp + fp > 0 ? static_cast<double>(tp) / (tp + fp) : 0.0;
        const double recall = tp + fn > 0 ? static_cast<double>(tp) / (tp + fn) : 0.0;
        r.per_class[c] =
            precision + recall > 0.0 ? 2.0 * precision * recall / (precision + recall) : 0.0;
        r.absent[c] = tp + fp + fn == 0;
        macro += r.per_class[c];
    }
    r.macro = macro / kNumClasses;
    return r;
}

F1Result evaluate_dataset(const ModelBundle& bundle, const Dataset& test_set, int batch_size) {
    const auto& snaps = test_set.snapshots;
    if (snaps.empty()) throw EmptyInput("no test snapshots");
    std::vector<int> predictions, labels;
    predictions.reserve(snaps.size());
    labels.reserve(snaps.size());
    for (std::size_t begin = 0; begin < snaps.size(); begin += static_cast<std::size_t>(batch_size)) {
        const std::size_t end = std::min(begin + static_cast<std::size_t>(batch_size), snaps.size());
        std::vector<int> batch(end - begin);
        std::iota(batch.begin(), batch.end(), static_cast<int>(begin));
        const auto probs = predict(bundle.model, snapshots_to_tensor<float>(snaps, batch));
        const auto pred = argmax_classes(probs);
        predictions.insert(predictions.end(), pred.begin(), pred.end());
        for (const int idx : batch) labels.push_back(static_cast<int>(snaps[idx].label));
    }
    return f1_scores(predictions, labels);
}

namespace {

struct FoldData {
    Dataset train, val;
    std::vector<int> ordering;
    ScalingStats stats;
};

// Sort (optionally) and scale all parents from fold-train statistics, then
// sample snapshots for both sides.
FoldData prepare_fold(const std::vector<PqvfTensor>& parents, const std::vector<int>& train_idx,
                      const std::vector<int>& val_idx, bool sorting, const AugmentPolicy& policy,
                      std::uint64_t seed) {
    std::vector<int> ordering = identity_permutation(parents.front().n_pmus);
    if (sorting) {
        std::vector<PqvfTensor> train_parents;
        train_parents.reserve(train_idx.size());
        for (const int i : train_idx) train_parents.push_back(parents[i]);
        ordering = fiedler_order(build_graph(pairwise_correlation(train_parents))).permutation;
    }

    std::vector<PqvfTensor> transformed;
    transformed.reserve(parents.size());
    for (const auto& p : parents) transformed.push_back(apply_order(p, ordering));

    std::vector<PqvfTensor> train_sorted;
    train_sorted.reserve(train_idx.size());
    for (const int i : train_idx) train_sorted.push_back(transformed[i]);
    const ScalingStats stats = compute_scaling_stats(train_sorted);
    for (auto& p : transformed) p = zscore_scale(p, stats);

    FoldData fold;
    fold.train = build_snapshot_dataset(transformed, train_idx, policy, mix_seed(seed, "aug"));
    fold.val = build_snapshot_dataset(transformed, val_idx, policy, mix_seed(seed, "augval"));
    fold.train.scaling_stats = stats;
    fold.val.scaling_stats = stats;
    fold.ordering = std::move(ordering);
    fold.stats = stats;
    return fold;
}

std::vector<int> fold_complement(const std::vector<std::vector<int>>& folds, std::size_t held_out) {
    std::vector<int> idx;
    for (std::size_t f = 0; f < folds.size(); ++f)
        if (f != held_out) idx.insert(idx.end(), folds[f].begin(), folds[f].end());
    std::sort(idx.begin(), idx.end());
    return idx;
}

}  // namespace

BetaSweepResult kfold_beta_sweep(const std::vector<PqvfTensor>& parents,
                                 const std::vector<double>& betas, const TrainConfig& config,
                                 const Ablation& ablation, const AugmentPolicy& policy) {
    if (betas.empty()) throw ValueError("empty beta grid");
    check_train_config(config);
    const auto folds = kfold_indices(parents, config.folds, mix_seed(config.seed, "folds"));

    BetaSweepResult result;
    result.betas = betas;
    result.mean_macro_f1.assign(betas.size(), 0.0);

    for (std::size_t f = 0; f < folds.size(); ++f) {
        const auto train_idx = fold_complement(folds, f);
        const auto fold = prepare_fold(parents, train_idx, folds[f], ablation.sorting, policy,
                                       mix_seed(config.seed, "fold:" + std::to_string(f)));
        for (std::size_t bi = 0; bi < betas.size(); ++bi) {
            TrainConfig cfg = config;
            cfg.beta = betas[bi];
            cfg.seed = mix_seed(config.seed, "fold:" + std::to_string(f));
            const auto trained = train(fold.train, cfg, ablation);
            result.mean_macro_f1[bi] += evaluate_dataset(trained.bundle, fold.val).macro;
        }
    }
    for (auto& v : result.mean_macro_f1) v /= static_cast<double>(folds.size());

    // ascending beta scan so ties resolve to the smaller value
    std::vector<std::size_t> by_beta(betas.size());
    std::iota(by_beta.begin(), by_beta.end(), std::size_t{0});
    std::sort(by_beta.begin(), by_beta.end(), [&](std::size_t a, std::size_t b) { return betas[a] < betas[b]; });
    double best = -1.0;
    for (const auto bi : by_beta)
        if (result.mean_macro_f1[bi] > best) {
            best = result.mean_macro_f1[bi];
            result.best_beta = betas[bi];
        }
    return result;
}

SlidingWindowSeries sliding_window_eval(const ModelBundle& bundle,
                                        const std::vector<PqvfTensor>& tensors, double window_s,
                                        double start_offset_s, double step_s) {
    std::vector<const PqvfTensor*> events;
    for (const auto& t : tensors) {
        if (!t.label) continue;
        if (*t.label != EventClass::LineEvent && *t.label != EventClass::GeneratorEvent) continue;
        if (!t.event_start_index) throw ValueError("event tensor lacks an event start index");
        events.push_back(&t);
    }
    if (events.empty()) throw EmptyInput("no line or generator tensors to evaluate");

    const double rate = events.front()->sample_rate_hz;
    const int t_s = static_cast<int>(std::llround(window_s * rate));
    const int n_pmus = events.front()->n_pmus;

    // grid limited by the tensor with the least room after its event
    int max_steps = -1;
    for (const auto* t : events) {
        if (t->sample_rate_hz != rate || t->n_pmus != n_pmus)
            throw DimensionError("sliding evaluation needs homogeneous tensors");
        int k = 0;
        while (*t->event_start_index +
                   static_cast<int>(std::llround((start_offset_s + (k + 1) * step_s) * rate)) <=
               t->t_len)
            ++k;
        if (*t->event_start_index + static_cast<int>(std::llround(start_offset_s * rate)) > t->t_len)
            throw WindowExceedsTensor("no room for the first window after the event start");
        max_steps = max_steps < 0 ? k : std::min(max_steps, k);
    }

    std::vector<PqvfTensor> prepared;
    std::vector<int> labels;
    prepared.reserve(events.size());
    for (const auto* t : events) {
        prepared.push_back(zscore_scale(apply_order(*t, bundle.ordering), bundle.stats));
        labels.push_back(static_cast<int>(*t->label));
    }

    SlidingWindowSeries series;
    for (int k = 0; k <= max_steps; ++k) {
        const double elapsed = start_offset_s + k * step_s;
        nn::Tensor4<float> x(static_cast<int>(prepared.size()), t_s, n_pmus, kNumChannels);
        for (std::size_t e = 0; e < prepared.size(); ++e) {
            const auto& t = prepared[e];
            const int right = *events[e]->event_start_index + static_cast<int>(std::llround(elapsed * rate));
            const int left = right - t_s;
            for (int j = 0; j < t_s; ++j) {
                const int row = std::max(left + j, 0);  // replicate the first sample leftward
                for (int p = 0; p < n_pmus; ++p)
                    for (int c = 0; c < kNumChannels; ++c)
                        x.at(static_cast<int>(e), j, p, c) = t.at(row, p, c);
            }
        }
        const auto pred = argmax_classes(predict(bundle.model, x));
        series.elapsed_s.push_back(elapsed);
        series.f1.push_back(f1_scores(pred, labels));
    }
    return series;
}

namespace {

using nlohmann::json;

json f1_to_json(const F1Result& r) {
    json out;
    out["per_class_f1"] = r.per_class;
    out["macro_f1"] = r.macro;
    out["accuracy"] = r.accuracy;
    out["confusion"] = r.confusion;
    out["absent_classes"] = r.absent;
    return out;
}

}  // namespace

std::string report_to_json(const EvalReport& report) {
    json out;
    out["arm"] = report.arm;
    out["test"] = f1_to_json(report.test);
    json epochs = json::array();
    for (const auto& e : report.epochs)
        epochs.push_back({{"epoch", e.epoch},
                          {"ce", e.ce},
                          {"mi_nats", e.mi_nats},
                          {"loss", e.loss},
                          {"train_accuracy", e.train_accuracy}});
    out["epochs"] = epochs;
    json sliding = json::array();
    for (std::size_t i = 0; i < report.sliding.elapsed_s.size(); ++i)
        sliding.push_back({{"elapsed_s", report.sliding.elapsed_s[i]}, {"f1", f1_to_json(report.sliding.f1[i])}});
    out["sliding_window"] = sliding;
    out["leakage_ok"] = report.leakage_ok;
    out["config_hash"] = report.config_hash;
    return out.dump(2);
}

std::string timings_to_json(const std::map<std::string, std::vector<RunTimings>>& timings) {
    json out;
    for (const auto& [arm, runs] : timings) {
        json arr = json::array();
        for (const auto& t : runs)
            arr.push_back({{"train_s", t.train_s}, {"per_sample_inference_s", t.per_sample_inference_s}});
        out[arm] = arr;
    }
    return out.dump(2);
}

ExperimentResult run_experiment(const ExperimentProfile& profile, std::uint64_t data_seed,
                                const std::string& config_hash) {
    const auto grid = gen_grid(profile.n_pmus, profile.length_scale, mix_seed(data_seed, "grid"));
    const auto parents = gen_dataset(grid, profile.parent_counts, profile.parent_window_s,
                                     profile.rate_hz, profile.noise_sigma, mix_seed(data_seed, "data"));
    const auto split = split_dataset(parents, profile.test_fraction, mix_seed(data_seed, "split"));

    bool leakage_ok = true;
    for (const int i : split.train)
        if (std::find(split.test.begin(), split.test.end(), i) != split.test.end()) leakage_ok = false;

    // data variants shared across arms: sorting on/off
    const auto plain = prepare_fold(parents, split.train, split.test, false, profile.policy, data_seed);
    const auto sorted = prepare_fold(parents, split.train, split.test, true, profile.policy, data_seed);

    std::vector<const PqvfTensor*> test_parent_ptrs;
    for (const int i : split.test) test_parent_ptrs.push_back(&parents[i]);

    struct Task {
        Ablation ablation;
        std::uint64_t seed;
        int slot;
    };
    std::vector<Task> tasks;
    const std::array<Ablation, 4> arms = {Ablation{false, false}, Ablation{false, true},
                                          Ablation{true, false}, Ablation{true, true}};
    for (const auto& arm : arms) {
        const bool averaged = arm.name() == "baseline" || arm.name() == "gsp_info";
        const int seeds = averaged ? profile.ablation_seeds : 1;
        for (int s = 0; s < seeds; ++s)
            tasks.push_back({arm, mix_seed(data_seed, arm.name() + ":seed:" + std::to_string(s)),
                             s});
    }

    std::vector<EvalReport> reports(tasks.size());
    std::vector<RunTimings> timings(tasks.size());
    std::vector<std::exception_ptr> errors(tasks.size());

    auto run_task = [&](std::size_t ti) {
        const auto& task = tasks[ti];
        const FoldData& data = task.ablation.sorting ? sorted : plain;
        TrainConfig cfg = profile.tcfg;
        cfg.seed = task.seed;

        const auto t0 = std::chrono::steady_clock::now();
        auto trained = train(data.train, cfg, task.ablation);
        trained.bundle.ordering = data.ordering;
        const auto t1 = std::chrono::steady_clock::now();

        EvalReport report;
        report.arm = task.ablation.name();
        report.test = evaluate_dataset(trained.bundle, data.val);
        const auto t2 = std::chrono::steady_clock::now();
        report.epochs = trained.epochs;
        if (profile.sliding) {
            std::vector<PqvfTensor> raw_test;
            for (const auto* p : test_parent_ptrs) raw_test.push_back(*p);
            report.sliding = sliding_window_eval(trained.bundle, raw_test, profile.policy.window_s);
        }
        report.leakage_ok = leakage_ok;
        report.config_hash = config_hash;

        RunTimings timing;
        timing.train_s = std::chrono::duration<double>(t1 - t0).count();
        timing.per_sample_inference_s =
            std::chrono::duration<double>(t2 - t1).count() / static_cast<double>(data.val.snapshots.size());
        reports[ti] = std::move(report);
        timings[ti] = timing;
    };

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned n_threads = std::min<unsigned>(hw, static_cast<unsigned>(tasks.size()));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t ti; (ti = next.fetch_add(1)) < tasks.size();) {
            try {
                run_task(ti);
            } catch (...) {
                errors[ti] = std::current_exception();
            }
        }
    };
    if (n_threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> threads;
        for (unsigned i = 0; i < n_threads; ++i) threads.emplace_back(worker);
        for (auto& t : threads) t.join();
    }
    for (const auto& err : errors)
        if (err) std::rethrow_exception(err);

    ExperimentResult result;
    for (std::size_t ti = 0; ti < tasks.size(); ++ti) {
        result.arms[tasks[ti].ablation.name()].push_back(std::move(reports[ti]));
        result.timings[tasks[ti].ablation.name()].push_back(timings[ti]);
    }
    return result;
}

}  // namespace pmuev
