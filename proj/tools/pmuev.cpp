// Command-line surface for the event-identification pipeline.
//
// Exit codes: 0 success, 1 usage error, 2 data/config error, 3 numeric
// divergence. Failures additionally print a machine-readable JSON object on
// stderr. All randomness flows from --seed; every artifact embeds the hash of
// the resolved run config.

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "pmuev/config.hpp"
#include "pmuev/quality.hpp"
#include "pmuev/train_eval.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace pmuev;

namespace {

struct CliError {
    std::string type, message;
    int code;
};

[[noreturn]] void fail(std::string type, std::string message, int code) {
    throw CliError{std::move(type), std::move(message), code};
}

RunConfig load_config(const std::string& path) {
    if (path.empty()) return RunConfig{};
    std::ifstream in(path);
    if (!in) fail("ValueError", "cannot open config: " + path, 2);
    std::stringstream buf;
    buf << in.rdbuf();
    return parse_run_config(buf.str());
}

void write_text(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::trunc);
    if (!out) fail("ValueError", "cannot open for writing: " + path, 2);
    out << text;
    if (!out) fail("ValueError", "write failed: " + path, 2);
}

// Deterministic order: sorted by filename.
std::vector<std::string> tensor_files(const std::string& dir) {
    if (!fs::is_directory(dir)) fail("ValueError", "not a directory: " + dir, 2);
    std::vector<std::string> files;
    for (const auto& entry : fs::directory_iterator(dir))
        if (entry.is_regular_file() && entry.path().extension() == ".pqvf")
            files.push_back(entry.path().string());
    std::sort(files.begin(), files.end());
    if (files.empty()) fail("EmptyInput", "no .pqvf files in " + dir, 2);
    return files;
}

std::vector<PqvfTensor> read_tensors(const std::string& dir) {
    std::vector<PqvfTensor> tensors;
    for (const auto& f : tensor_files(dir)) tensors.push_back(read_tensor_file(f));
    return tensors;
}

Ablation ablation_from_name(const std::string& name) {
    if (name == "baseline") return {false, false};
    if (name == "info") return {false, true};
    if (name == "gsp") return {true, false};
    if (name == "gsp_info") return {true, true};
    fail("ValueError", "unknown ablation: " + name + " (expected baseline|info|gsp|gsp_info)", 1);
}

std::vector<int> identity_ordering(int n) {
    std::vector<int> p(n);
    std::iota(p.begin(), p.end(), 0);
    return p;
}

// Model and data must have been prepared with the same permutation and
// scaling; silently mixing them would corrupt every prediction.
void check_provenance(const ModelBundle& bundle, const DatasetFile& data) {
    const auto data_order =
        data.ordering.empty() ? identity_ordering(data.dataset.scaling_stats.n_pmus) : data.ordering;
    const auto model_order =
        bundle.ordering.empty() ? identity_ordering(bundle.stats.n_pmus) : bundle.ordering;
    if (data_order != model_order)
        fail("ProvenanceError", "dataset PMU ordering does not match the checkpoint", 2);
    if (data.dataset.scaling_stats.n_pmus != bundle.stats.n_pmus ||
        data.dataset.scaling_stats.mean != bundle.stats.mean ||
        data.dataset.scaling_stats.stddev != bundle.stats.stddev)
        fail("ProvenanceError", "dataset scaling stats do not match the checkpoint", 2);
}

// ------------------------------------------------------------ subcommands

int cmd_synth(const std::string& config_path, std::uint64_t seed, const std::string& out_dir) {
    const RunConfig cfg = load_config(config_path);
    const std::string hash = config_hash(cfg);
    fs::create_directories(out_dir);

    const auto grid = gen_grid(cfg.n_pmus, cfg.length_scale, mix_seed(seed, "grid"));
    const auto tensors = gen_dataset(grid, cfg.parent_counts, cfg.parent_window_s, cfg.rate_hz,
                                     cfg.noise_sigma, mix_seed(seed, "data"));

    json manifest{{"config_hash", hash}, {"seed", seed}, {"resolved_config", json::parse(run_config_to_json(cfg))}};
    json files = json::array();
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        char name[32];
        std::snprintf(name, sizeof(name), "tensor_%04zu.pqvf", i);
        write_tensor_file(tensors[i], (fs::path(out_dir) / name).string());
        json rec{{"file", name}, {"label", to_string(*tensors[i].label)}};
        if (tensors[i].event_start_index) rec["event_start_index"] = *tensors[i].event_start_index;
        files.push_back(std::move(rec));
    }
    manifest["files"] = std::move(files);
    write_text((fs::path(out_dir) / "manifest.json").string(), manifest.dump(2) + "\n");
    std::cout << "wrote " << tensors.size() << " tensors to " << out_dir << "\n";
    return 0;
}

int cmd_preprocess(const std::string& in_path, double rate_hz, const std::string& out_path) {
    std::ifstream in(in_path);
    if (!in) fail("ValueError", "cannot open: " + in_path, 2);
    const auto records = parse_record_csv(in);
    const auto result = run_quality_pipeline(records, rate_hz);
    write_tensor_file(result.tensor, out_path);
    std::cout << "wrote " << out_path << " (" << result.tensor.t_len << " samples, "
              << result.tensor.n_pmus << " PMUs"
              << (result.impute_converged ? "" : ", imputation hit its iteration cap") << ")\n";
    return 0;
}

int cmd_sort(const std::string& in_dir, const std::string& out_path) {
    const auto ordering = fiedler_order(build_graph(pairwise_correlation(read_tensors(in_dir))));
    json out{{"permutation", ordering.permutation},
             {"fiedler", ordering.fiedler},
             {"lambda2", ordering.lambda2}};
    write_text(out_path, out.dump(2) + "\n");
    std::cout << "wrote " << out_path << " (lambda2 = " << ordering.lambda2 << ")\n";
    return 0;
}

int cmd_augment(const std::string& in_dir, const std::string& config_path,
                const std::string& order_path, std::uint64_t seed, const std::string& out_dir) {
    const RunConfig cfg = load_config(config_path);
    const std::string hash = config_hash(cfg);
    auto parents = read_tensors(in_dir);

    std::vector<int> ordering = identity_ordering(parents.front().n_pmus);
    if (!order_path.empty()) {
        std::ifstream in(order_path);
        if (!in) fail("ValueError", "cannot open ordering: " + order_path, 2);
        json doc = json::parse(in, nullptr, false);
        if (doc.is_discarded() || !doc.contains("permutation"))
            fail("CorruptFile", "not an ordering file: " + order_path, 2);
        ordering = doc["permutation"].get<std::vector<int>>();
    }
    for (auto& p : parents) p = apply_order(p, ordering);

    const auto split = split_dataset(parents, cfg.test_fraction, mix_seed(seed, "split"));
    std::vector<PqvfTensor> train_parents;
    for (const int i : split.train) train_parents.push_back(parents[i]);
    const ScalingStats stats = compute_scaling_stats(train_parents);
    for (auto& p : parents) p = zscore_scale(p, stats);

    DatasetFile train_file, test_file;
    train_file.dataset = build_snapshot_dataset(parents, split.train, cfg.policy, mix_seed(seed, "aug"));
    test_file.dataset = build_snapshot_dataset(parents, split.test, cfg.policy, mix_seed(seed, "augtest"));
    train_file.dataset.scaling_stats = stats;
    test_file.dataset.scaling_stats = stats;
    train_file.ordering = ordering;
    test_file.ordering = ordering;
    train_file.config_hash = hash;
    test_file.config_hash = hash;

    fs::create_directories(out_dir);
    write_dataset_file(train_file, (fs::path(out_dir) / "train.pmds").string());
    write_dataset_file(test_file, (fs::path(out_dir) / "test.pmds").string());
    write_text((fs::path(out_dir) / "resolved_config.json").string(), run_config_to_json(cfg) + "\n");
    std::cout << "wrote " << train_file.dataset.snapshots.size() << " train and "
              << test_file.dataset.snapshots.size() << " test snapshots to " << out_dir << "\n";
    return 0;
}

int cmd_train(const std::string& data_path, const std::string& config_path,
              const std::string& ablation_name, std::uint64_t seed, const std::string& out_path,
              const std::string& diag_path) {
    RunConfig cfg = load_config(config_path);
    const std::string hash = config_hash(cfg);
    const Ablation ablation = ablation_name.empty() ? to_ablation(cfg) : ablation_from_name(ablation_name);
    const DatasetFile data = read_dataset_file(data_path);

    TrainConfig tcfg = cfg.train;
    tcfg.seed = seed;
    auto result = train(data.dataset, tcfg, ablation);
    result.bundle.ordering = data.ordering.empty()
                                 ? identity_ordering(data.dataset.scaling_stats.n_pmus)
                                 : data.ordering;
    save_bundle(result.bundle, out_path, hash);

    if (!diag_path.empty()) {
        std::ostringstream lines;
        for (const auto& e : result.epochs)
            lines << json{{"epoch", e.epoch},
                          {"ce", e.ce},
                          {"mi_nats", e.mi_nats},
                          {"loss", e.loss},
                          {"train_accuracy", e.train_accuracy}}
                         .dump()
                  << "\n";
        write_text(diag_path, lines.str());
    }
    std::cout << "wrote " << out_path << " (" << ablation.name() << ", final train accuracy "
              << result.epochs.back().train_accuracy << ")\n";
    return 0;
}

int cmd_eval(const std::string& model_path, const std::string& data_path,
             const std::string& train_data_path, const std::string& tensors_dir,
             const std::string& out_path, const std::string& timings_path) {
    const ModelBundle bundle = load_bundle(model_path);
    const DatasetFile data = read_dataset_file(data_path);
    check_provenance(bundle, data);

    EvalReport report;
    report.arm = bundle.ablation.name();
    report.config_hash = bundle.config_hash;

    const auto t0 = std::chrono::steady_clock::now();
    report.test = evaluate_dataset(bundle, data.dataset);
    const auto t1 = std::chrono::steady_clock::now();

    if (!train_data_path.empty()) {
        const DatasetFile train_data = read_dataset_file(train_data_path);
        check_provenance(bundle, train_data);
        report.leakage_ok = true;
        for (const auto& test_snap : data.dataset.snapshots)
            for (const auto& train_snap : train_data.dataset.snapshots)
                if (test_snap.source_id == train_snap.source_id) report.leakage_ok = false;
    }
    if (!tensors_dir.empty())
        report.sliding = sliding_window_eval(bundle, read_tensors(tensors_dir));

    write_text(out_path, report_to_json(report) + "\n");
    if (!timings_path.empty()) {
        RunTimings t;
        t.per_sample_inference_s = std::chrono::duration<double>(t1 - t0).count() /
                                   static_cast<double>(data.dataset.snapshots.size());
        write_text(timings_path, timings_to_json({{report.arm, {t}}}) + "\n");
    }
    std::cout << "wrote " << out_path << " (macro F1 " << report.test.macro << ")\n";
    return 0;
}

int cmd_classify(const std::string& model_path, const std::string& in_path, double window_s,
                 const std::string& out_path) {
    const ModelBundle bundle = load_bundle(model_path);
    PqvfTensor tensor = read_tensor_file(in_path);
    if (!bundle.ordering.empty()) tensor = apply_order(tensor, bundle.ordering);
    tensor = zscore_scale(tensor, bundle.stats);

    const int t_s = static_cast<int>(std::llround(window_s * tensor.sample_rate_hz));
    if (t_s < 1 || t_s > tensor.t_len)
        fail("WindowExceedsTensor", "tensor shorter than the classification window", 2);

    // classify the most recent window
    nn::Tensor4<float> x(1, t_s, tensor.n_pmus, kNumChannels);
    const int start = tensor.t_len - t_s;
    for (int t = 0; t < t_s; ++t)
        for (int p = 0; p < tensor.n_pmus; ++p)
            for (int c = 0; c < kNumChannels; ++c) x.at(0, t, p, c) = tensor.at(start + t, p, c);

    const auto probs = predict(bundle.model, x);
    const int klass = argmax_classes(probs)[0];
    json out{{"class", klass},
             {"class_name", to_string(static_cast<EventClass>(klass))},
             {"probabilities",
              {probs.at(0, 0, 0, 0), probs.at(0, 0, 0, 1), probs.at(0, 0, 0, 2), probs.at(0, 0, 0, 3)}},
             {"config_hash", bundle.config_hash}};
    write_text(out_path, out.dump(2) + "\n");
    std::cout << "wrote " << out_path << " (" << to_string(static_cast<EventClass>(klass)) << ")\n";
    return 0;
}

int cmd_baseline(const std::string& train_path, const std::string& test_path,
                 const std::string& method, int components, int k, double c, double gamma,
                 std::uint64_t seed, const std::string& out_path) {
    const DatasetFile train_data = read_dataset_file(train_path);
    const DatasetFile test_data = read_dataset_file(test_path);
    if (train_data.ordering != test_data.ordering)
        fail("ProvenanceError", "train and test sets were sorted differently", 2);
    if (train_data.dataset.scaling_stats.mean != test_data.dataset.scaling_stats.mean)
        fail("ProvenanceError", "train and test sets were scaled differently", 2);

    const auto train_flat = flatten_snapshots(train_data.dataset.snapshots);
    const auto test_flat = flatten_snapshots(test_data.dataset.snapshots);
    const auto pca = pca_project(train_flat, components);
    const Eigen::MatrixXd test_scores = (test_flat.rowwise() - pca.mean.transpose()) * pca.basis;

    std::vector<int> train_labels, test_labels;
    for (const auto& s : train_data.dataset.snapshots) train_labels.push_back(static_cast<int>(s.label));
    for (const auto& s : test_data.dataset.snapshots) test_labels.push_back(static_cast<int>(s.label));

    std::vector<int> predictions;
    std::string arm;
    if (method == "knn") {
        predictions = knn_classify(pca.scores, train_labels, test_scores, k);
        arm = "pca_knn";
    } else if (method == "svm") {
        SvmConfig svm;
        svm.c = c;
        svm.gamma = gamma;
        svm.seed = seed;
        const auto result = svm_classify(pca.scores, train_labels, test_scores, svm);
        predictions = result.predictions;
        arm = "pca_svm";
    } else {
        fail("ValueError", "unknown method: " + method + " (expected knn|svm)", 1);
    }

    EvalReport report;
    report.arm = arm;
    report.test = f1_scores(predictions, test_labels);
    report.leakage_ok = true;
    for (const auto& test_snap : test_data.dataset.snapshots)
        for (const auto& train_snap : train_data.dataset.snapshots)
            if (test_snap.source_id == train_snap.source_id) report.leakage_ok = false;
    report.config_hash = train_data.config_hash;
    write_text(out_path, report_to_json(report) + "\n");
    std::cout << "wrote " << out_path << " (macro F1 " << report.test.macro << ")\n";
    return 0;
}

int cmd_repr_export(const std::string& model_path, const std::string& data_path,
                    const std::string& out_path) {
    const ModelBundle bundle = load_bundle(model_path);
    const DatasetFile data = read_dataset_file(data_path);
    check_provenance(bundle, data);
    const auto rep = export_representations(bundle, data.dataset);
    std::ofstream out(out_path, std::ios::trunc);
    if (!out) fail("ValueError", "cannot open for writing: " + out_path, 2);
    write_repr_csv(rep, out);
    std::cout << "wrote " << out_path << " (" << rep.labels.size() << " rows)\n";
    return 0;
}

int cmd_beta_sweep(const std::string& tensors_dir, const std::string& config_path,
                   const std::string& betas_arg, std::uint64_t seed, const std::string& out_path) {
    RunConfig cfg = load_config(config_path);
    cfg.train.seed = seed;
    std::vector<double> betas;
    if (betas_arg.empty()) {
        betas = kBetaGrid;
    } else {
        std::stringstream ss(betas_arg);
        std::string item;
        while (std::getline(ss, item, ','))
            try {
                betas.push_back(std::stod(item));
            } catch (const std::exception&) {
                fail("ValueError", "bad beta value: " + item, 1);
            }
    }
    const auto parents = read_tensors(tensors_dir);
    const auto sweep = kfold_beta_sweep(parents, betas, cfg.train, to_ablation(cfg), cfg.policy);
    json out{{"betas", sweep.betas},
             {"mean_macro_f1", sweep.mean_macro_f1},
             {"best_beta", sweep.best_beta},
             {"config_hash", config_hash(cfg)}};
    write_text(out_path, out.dump(2) + "\n");
    std::cout << "wrote " << out_path << " (best beta " << sweep.best_beta << ")\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"PMU event identification pipeline"};
    app.require_subcommand(1);

    std::string config_path, in_path, out_path, order_path, model_path, data_path;
    std::string train_data_path, tensors_dir, diag_path, timings_path, ablation_name;
    std::string method = "knn", betas_arg;
    std::uint64_t seed = 0;
    double rate_hz = 30.0, window_s = 12.0, c = 1.0, gamma = 0.0;
    int components = 10, k = 1;

    auto* synth = app.add_subcommand("synth", "Generate a labeled synthetic tensor set");
    synth->add_option("--config", config_path, "Run config JSON");
    synth->add_option("--seed", seed, "Master seed");
    synth->add_option("--out", out_path, "Output directory")->required();

    auto* preprocess = app.add_subcommand("preprocess", "Quality pipeline: phasor CSV to tensor");
    preprocess->add_option("--in", in_path, "Input CSV of phasor records")->required();
    preprocess->add_option("--rate", rate_hz, "Reporting rate in Hz");
    preprocess->add_option("--out", out_path, "Output tensor file")->required();

    auto* sort_cmd = app.add_subcommand("sort", "Spectral PMU ordering from a tensor directory");
    sort_cmd->add_option("--in", in_path, "Directory of .pqvf tensors")->required();
    sort_cmd->add_option("--out", out_path, "Ordering JSON")->required();

    auto* augment = app.add_subcommand("augment", "Split, scale, and window tensors into datasets");
    augment->add_option("--in", in_path, "Directory of .pqvf tensors")->required();
    augment->add_option("--config", config_path, "Run config JSON");
    augment->add_option("--order", order_path, "Ordering JSON from `sort`");
    augment->add_option("--seed", seed, "Master seed");
    augment->add_option("--out", out_path, "Output directory")->required();

    auto* train_cmd = app.add_subcommand("train", "Train a classifier on a snapshot dataset");
    train_cmd->add_option("--data", data_path, "Training .pmds file")->required();
    train_cmd->add_option("--config", config_path, "Run config JSON");
    train_cmd->add_option("--ablation", ablation_name, "baseline|info|gsp|gsp_info");
    train_cmd->add_option("--seed", seed, "Master seed");
    train_cmd->add_option("--out", out_path, "Output checkpoint")->required();
    train_cmd->add_option("--diagnostics", diag_path, "Epoch diagnostics JSONL");

    auto* eval_cmd = app.add_subcommand("eval", "Evaluate a checkpoint on a test dataset");
    eval_cmd->add_option("--model", model_path, "Checkpoint file")->required();
    eval_cmd->add_option("--data", data_path, "Test .pmds file")->required();
    eval_cmd->add_option("--train-data", train_data_path, "Training .pmds for the leakage check");
    eval_cmd->add_option("--tensors", tensors_dir, "Raw tensors for the sliding-window series");
    eval_cmd->add_option("--out", out_path, "Report JSON")->required();
    eval_cmd->add_option("--timings", timings_path, "Timings JSON (kept out of the report)");

    auto* classify = app.add_subcommand("classify", "Classify the latest window of one tensor");
    classify->add_option("--model", model_path, "Checkpoint file")->required();
    classify->add_option("--in", in_path, "Tensor file")->required();
    classify->add_option("--window-s", window_s, "Window length in seconds");
    classify->add_option("--out", out_path, "Prediction JSON")->required();

    auto* baseline = app.add_subcommand("baseline", "PCA+KNN / PCA+SVM reference classifiers");
    baseline->add_option("--train", train_data_path, "Training .pmds file")->required();
    baseline->add_option("--test", data_path, "Test .pmds file")->required();
    baseline->add_option("--method", method, "knn|svm");
    baseline->add_option("--components", components, "Principal components");
    baseline->add_option("--k", k, "KNN neighbor count");
    baseline->add_option("--c", c, "SVM soft-margin C");
    baseline->add_option("--gamma", gamma, "SVM RBF gamma (0 = auto)");
    baseline->add_option("--seed", seed, "Master seed");
    baseline->add_option("--out", out_path, "Report JSON")->required();

    auto* repr = app.add_subcommand("repr-export", "Export 2-PC representation coordinates");
    repr->add_option("--model", model_path, "Checkpoint file")->required();
    repr->add_option("--data", data_path, "Snapshot .pmds file")->required();
    repr->add_option("--out", out_path, "CSV output")->required();

    auto* sweep = app.add_subcommand("beta-sweep", "K-fold cross-validation over a beta grid");
    sweep->add_option("--tensors", tensors_dir, "Directory of raw .pqvf tensors")->required();
    sweep->add_option("--config", config_path, "Run config JSON");
    sweep->add_option("--betas", betas_arg, "Comma-separated grid (default 0.01,0.05,0.1,0.6,1)");
    sweep->add_option("--seed", seed, "Master seed");
    sweep->add_option("--out", out_path, "Sweep JSON")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForAllHelp& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        std::cerr << json{{"error", "UsageError"}, {"message", e.what()}}.dump() << "\n";
        std::cerr << e.what() << "\n";
        return 1;
    }

    try {
        try {
            if (synth->parsed()) return cmd_synth(config_path, seed, out_path);
            if (preprocess->parsed()) return cmd_preprocess(in_path, rate_hz, out_path);
            if (sort_cmd->parsed()) return cmd_sort(in_path, out_path);
            if (augment->parsed())
                return cmd_augment(in_path, config_path, order_path, seed, out_path);
            if (train_cmd->parsed())
                return cmd_train(data_path, config_path, ablation_name, seed, out_path, diag_path);
            if (eval_cmd->parsed())
                return cmd_eval(model_path, data_path, train_data_path, tensors_dir, out_path,
                                timings_path);
            if (classify->parsed()) return cmd_classify(model_path, in_path, window_s, out_path);
            if (baseline->parsed())
                return cmd_baseline(train_data_path, data_path, method, components, k, c, gamma,
                                    seed, out_path);
            if (repr->parsed()) return cmd_repr_export(model_path, data_path, out_path);
            if (sweep->parsed()) return cmd_beta_sweep(tensors_dir, config_path, betas_arg, seed, out_path);
            return 1;
        } catch (const DivergenceError& e) {
            fail("DivergenceError", e.what(), 3);
        } catch (const CliError&) {
            throw;
        } catch (const ValueError& e) {
            fail("ValueError", e.what(), 2);
        } catch (const VersionError& e) {
            fail("VersionError", e.what(), 2);
        } catch (const CorruptFile& e) {
            fail("CorruptFile", e.what(), 2);
        } catch (const ProvenanceError& e) {
            fail("ProvenanceError", e.what(), 2);
        } catch (const EmptyInput& e) {
            fail("EmptyInput", e.what(), 2);
        } catch (const ClassTooSmall& e) {
            fail("ClassTooSmall", e.what(), 2);
        } catch (const DisconnectedGraph& e) {
            fail("DisconnectedGraph", e.what(), 2);
        } catch (const Error& e) {
            fail("DataError", e.what(), 2);
        } catch (const std::exception& e) {
            fail("InternalError", e.what(), 2);
        }
    } catch (const CliError& e) {
        std::cerr << json{{"error", e.type}, {"message", e.message}}.dump() << "\n";
        std::cerr << "error: " << e.message << "\n";
        return e.code;
    }
}
