#pragma once

// Training with the information-loaded objective, k-fold beta selection,
// F1/confusion metrics, sliding-window online evaluation, PCA+KNN and PCA+SVM
// baselines, and the 2-PC representation export.

#include <array>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "pmuev/augment.hpp"
#include "pmuev/classifier.hpp"
#include "pmuev/core.hpp"
#include "pmuev/gsp.hpp"
#include "pmuev/infoload.hpp"
#include "pmuev/synth.hpp"

namespace pmuev {

struct TrainConfig {
    int epochs = 200;
    int batch_size = 16;
    double lr = 1e-3;
    double beta = 0.1;
    std::uint64_t seed = 0;
    int folds = 10;
};

struct Ablation {
    bool sorting = false;
    bool info = false;

    std::string name() const {
        if (sorting && info) return "gsp_info";
        if (sorting) return "gsp";
        if (info) return "info";
        return "baseline";
    }
};

struct EpochDiagnostics {
    int epoch = 0;
    double ce = 0.0;        // mean per-sample cross entropy
    double mi_nats = 0.0;   // mean per-step batch estimate (0 when info off)
    double loss = 0.0;      // mean per-step batch objective
    double train_accuracy = 0.0;
};

struct ModelBundle {
    ClassifierModel<float> model;
    std::optional<MieNet<float>> mie;
    std::vector<int> ordering;  // identity when sorting is off
    ScalingStats stats;
    TrainConfig config;
    Ablation ablation;
    std::string config_hash;  // hash of the producing run config
};

struct TrainResult {
    ModelBundle bundle;
    std::vector<EpochDiagnostics> epochs;
};

// One checkpoint holds the encoder, estimator, MIE (when present), the PMU
// ordering and scaling stats the training data was prepared with, and the
// producing config hash; loading restores all of it.
void save_bundle(const ModelBundle& bundle, const std::string& path,
                 const std::string& config_hash = "");
ModelBundle load_bundle(const std::string& path);

// Snapshots must already be scaled (and sorted when the ablation says so).
// Per step: labeled batch x1 and an independent batch x2 are drawn; the MIE
// takes its ascent step first, then the encoder/estimator step uses the
// re-evaluated estimate. With info off the x2/MIE machinery never runs, so the
// baseline path is byte-identical to plain CE training.
TrainResult train(const Dataset& train_set, const TrainConfig& config, const Ablation& ablation);

struct F1Result {
    std::array<double, kNumClasses> per_class{};
    double macro = 0.0;
    double accuracy = 0.0;
    std::array<std::array<long, kNumClasses>, kNumClasses> confusion{};  // [label][prediction]
    std::array<bool, kNumClasses> absent{};  // class in neither labels nor predictions
};

F1Result f1_scores(const std::vector<int>& predictions, const std::vector<int>& labels);

F1Result evaluate_dataset(const ModelBundle& bundle, const Dataset& test_set, int batch_size = 64);

struct BetaSweepResult {
    std::vector<double> betas;
    std::vector<double> mean_macro_f1;
    double best_beta = 0.0;
};

inline const std::vector<double> kBetaGrid = {0.01, 0.05, 0.1, 0.6, 1.0};

// Parent-level stratified folds; fold pipelines redo ordering and scaling from
// their own training parents. Ties go to the smaller beta.
BetaSweepResult kfold_beta_sweep(const std::vector<PqvfTensor>& parents,
                                 const std::vector<double>& betas, const TrainConfig& config,
                                 const Ablation& ablation, const AugmentPolicy& policy);

struct SlidingWindowSeries {
    std::vector<double> elapsed_s;
    std::vector<F1Result> f1;  // per elapsed time, over the evaluated tensors
};

// Windows whose right end sits at event start + elapsed; left edge replicates
// the first sample when the window would begin before the tensor does.
// Only line and generator tensors are evaluated; others are skipped.
SlidingWindowSeries sliding_window_eval(const ModelBundle& bundle,
                                        const std::vector<PqvfTensor>& tensors,
                                        double window_s = 12.0, double start_offset_s = 0.5,
                                        double step_s = 0.1);

struct PcaResult {
    Eigen::MatrixXd scores;              // [samples, k]
    Eigen::MatrixXd basis;               // [features, k], orthonormal columns
    Eigen::VectorXd mean;                // feature means
    Eigen::VectorXd explained_variance;  // sample variance per component
    int effective_rank = 0;
    bool rank_deficient = false;  // requested components beyond rank are zero
};

PcaResult pca_project(const Eigen::MatrixXd& data, int n_components);

Eigen::MatrixXd flatten_snapshots(const std::vector<Snapshot>& snapshots);

std::vector<int> knn_classify(const Eigen::MatrixXd& train, const std::vector<int>& labels,
                              const Eigen::MatrixXd& test, int k);

struct SvmConfig {
    double c = 1.0;
    double gamma = 0.0;  // <= 0 selects 1/(dims * mean feature variance)
    double tol = 1e-3;
    int max_quiet_passes = 5;    // consecutive sweeps without an update
    int max_total_sweeps = 200;  // hard bound; hitting it flags non-convergence
    std::uint64_t seed = 0;
};

struct SvmResult {
    std::vector<int> predictions;
    bool converged = true;
};

SvmResult svm_classify(const Eigen::MatrixXd& train, const std::vector<int>& labels,
                       const Eigen::MatrixXd& test, const SvmConfig& config = {});

struct ReprExport {
    Eigen::MatrixXd coords;  // [n, 2]
    std::vector<int> labels;
    std::vector<int> source_ids;
};

ReprExport export_representations(const ModelBundle& bundle, const Dataset& dataset);
void write_repr_csv(const ReprExport& rep, std::ostream& out);

struct EvalReport {
    std::string arm;  // ablation name
    F1Result test;
    std::vector<EpochDiagnostics> epochs;
    SlidingWindowSeries sliding;
    bool leakage_ok = false;
    std::string config_hash;
};

// Timings live outside EvalReport so reports stay byte-stable across runs.
struct RunTimings {
    double train_s = 0.0;
    double per_sample_inference_s = 0.0;
};

std::string report_to_json(const EvalReport& report);
std::string timings_to_json(const std::map<std::string, std::vector<RunTimings>>& timings);

struct ExperimentProfile {
    int n_pmus = 16;
    double length_scale = 0.4;
    double parent_window_s = 20.0;
    double rate_hz = 30.0;
    double noise_sigma = 1.0;
    std::array<int, kNumClasses> parent_counts = {25, 150, 17, 25};
    double test_fraction = 0.2;
    AugmentPolicy policy;
    TrainConfig tcfg;
    int ablation_seeds = 5;  // seeds for the baseline and gsp_info arms
    bool sliding = false;    // evaluate the sliding-window series per run
};

struct ExperimentResult {
    std::map<std::string, std::vector<EvalReport>> arms;
    std::map<std::string, std::vector<RunTimings>> timings;
};

// Four-way ablation on one synthetic dataset: data drawn once from the data
// seed; model seeds vary per arm. Runs are independent and execute on a small
// thread pool.
ExperimentResult run_experiment(const ExperimentProfile& profile, std::uint64_t data_seed,
                                const std::string& config_hash = "");

}  // namespace pmuev
