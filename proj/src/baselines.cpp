#include "pmuev/train_eval.hpp"

#include <algorithm>
#include <cmath>
#include <iostream>
#include <numeric>
#include <ostream>

namespace pmuev {

Eigen::MatrixXd flatten_snapshots(const std::vector<Snapshot>& snapshots) {
    if (snapshots.empty()) return Eigen::MatrixXd(0, 0);
    const auto features = static_cast<Eigen::Index>(snapshots.front().data.size());
    Eigen::MatrixXd out(static_cast<Eigen::Index>(snapshots.size()), features);
    for (std::size_t i = 0; i < snapshots.size(); ++i) {
        if (static_cast<Eigen::Index>(snapshots[i].data.size()) != features)
            throw DimensionError("snapshots of unequal size cannot be flattened together");
        for (Eigen::Index j = 0; j < features; ++j)
            out(static_cast<Eigen::Index>(i), j) = snapshots[i].data[static_cast<std::size_t>(j)];
    }
    return out;
}

PcaResult pca_project(const Eigen::MatrixXd& data, int n_components) {
    const Eigen::Index samples = data.rows(), features = data.cols();
    if (samples < 1 || features < 1) throw EmptyInput("no data for PCA");
    if (n_components < 1 || n_components > std::min(samples, features))
        throw ValueError("component count must lie in [1, min(samples, features)]");

    PcaResult r;
    r.mean = data.colwise().mean();
    const Eigen::MatrixXd centered = data.rowwise() - r.mean.transpose();
    Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const auto& sv = svd.singularValues();

    const double tol = sv.size() > 0 ? sv(0) * 1e-10 : 0.0;
    r.effective_rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i)
        if (sv(i) > tol && sv(i) > 0.0) ++r.effective_rank;
    r.rank_deficient = n_components > r.effective_rank;

    const int kept = std::min(n_components, r.effective_rank);
    r.basis = Eigen::MatrixXd::Zero(features, n_components);
    r.basis.leftCols(kept) = svd.matrixV().leftCols(kept);
    for (int k = 0; k < kept; ++k) {
        Eigen::Index largest = 0;
        r.basis.col(k).cwiseAbs().maxCoeff(&largest);
        if (r.basis(largest, k) < 0.0) r.basis.col(k) = -r.basis.col(k);
    }
    r.scores = centered * r.basis;

    r.explained_variance = Eigen::VectorXd::Zero(n_components);
    if (samples > 1)
        for (int k = 0; k < kept; ++k)
            r.explained_variance(k) = sv(k) * sv(k) / static_cast<double>(samples - 1);
    return r;
}

std::vector<int> knn_classify(const Eigen::MatrixXd& train, const std::vector<int>& labels,
                              const Eigen::MatrixXd& test, int k) {
    if (train.rows() == 0) throw EmptyTrain("no training points");
    if (static_cast<Eigen::Index>(labels.size()) != train.rows())
        throw ValueError("label count does not match training points");
    if (k < 1 || k > train.rows()) throw ValueError("K must lie in [1, train size]");
    if (test.cols() != train.cols()) throw DimensionError("train/test feature width mismatch");
    for (const int y : labels)
        if (y < 0 || y >= kNumClasses) throw ValueError("class id out of range");

    const Eigen::Index n = train.rows();
    std::vector<int> predictions(static_cast<std::size_t>(test.rows()));
    std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
    for (Eigen::Index q = 0; q < test.rows(); ++q) {
        const Eigen::VectorXd d2 = (train.rowwise() - test.row(q)).rowwise().squaredNorm();
        std::iota(order.begin(), order.end(), Eigen::Index{0});
        std::sort(order.begin(), order.end(), [&](Eigen::Index a, Eigen::Index b) {
            if (d2(a) != d2(b)) return d2(a) < d2(b);
            return a < b;  // distance ties break toward the earlier train index
        });
        std::array<int, kNumClasses> votes{};
        for (int i = 0; i < k; ++i) ++votes[labels[static_cast<std::size_t>(order[i])]];
        int best = 0;
        for (int c = 1; c < kNumClasses; ++c)
            if (votes[c] > votes[best]) best = c;  // vote ties keep the smaller class
        predictions[static_cast<std::size_t>(q)] = best;
    }
    return predictions;
}

namespace {

Eigen::MatrixXd rbf_kernel(const Eigen::MatrixXd& a, const Eigen::MatrixXd& b, double gamma) {
    const Eigen::VectorXd na = a.rowwise().squaredNorm(), nb = b.rowwise().squaredNorm();
    Eigen::MatrixXd k = -2.0 * (a * b.transpose());
    k.colwise() += na;
    k.rowwise() += nb.transpose();
    return (-gamma * k.array()).exp();
}

struct BinarySvm {
    Eigen::VectorXd alpha;
    double b = 0.0;
    bool converged = true;
};

// simplified sequential minimal optimization: random second index, analytic pair update
BinarySvm smo_train(const Eigen::MatrixXd& kernel, const Eigen::VectorXd& y, const SvmConfig& cfg,
                    Rng& rng) {
    const Eigen::Index n = kernel.rows();
    BinarySvm m;
    m.alpha = Eigen::VectorXd::Zero(n);

    auto decision = [&](Eigen::Index i) {
        return (m.alpha.array() * y.array() * kernel.col(i).array()).sum() + m.b;
    };

    int quiet = 0, sweeps = 0;
    while (quiet < cfg.max_quiet_passes && sweeps < cfg.max_total_sweeps) {
        ++sweeps;
        int changed = 0;
        for (Eigen::Index i = 0; i < n; ++i) {
            const double ei = decision(i) - y(i);
            const bool violates = (y(i) * ei < -cfg.tol && m.alpha(i) < cfg.c) ||
                                  (y(i) * ei > cfg.tol && m.alpha(i) > 0.0);
            if (!violates) continue;

            Eigen::Index j = rng.uniform_int(0, n - 2);
            if (j >= i) ++j;
            const double ej = decision(j) - y(j);
            const double ai_old = m.alpha(i), aj_old = m.alpha(j);

            double lo, hi;
            if (y(i) != y(j)) {
                lo = std::max(0.0, aj_old - ai_old);
                hi = std::min(cfg.c, cfg.c + aj_old - ai_old);
            } else {
                lo = std::max(0.0, ai_old + aj_old - cfg.c);
                hi = std::min(cfg.c, ai_old + aj_old);
            }
            if (lo >= hi) continue;
            const double eta = 2.0 * kernel(i, j) - kernel(i, i) - kernel(j, j);
            if (eta >= 0.0) continue;

            double aj = aj_old - y(j) * (ei - ej) / eta;
            aj = std::clamp(aj, lo, hi);
            if (std::abs(aj - aj_old) < 1e-5) continue;
            const double ai = ai_old + y(i) * y(j) * (aj_old - aj);
            m.alpha(i) = ai;
            m.alpha(j) = aj;

            const double b1 = m.b - ei - y(i) * (ai - ai_old) * kernel(i, i) -
                              y(j) * (aj - aj_old) * kernel(i, j);
            const double b2 = m.b - ej - y(i) * (ai - ai_old) * kernel(i, j) -
                              y(j) * (aj - aj_old) * kernel(j, j);
            if (ai > 0.0 && ai < cfg.c)
                m.b = b1;
            else if (aj > 0.0 && aj < cfg.c)
                m.b = b2;
            else
                m.b = 0.5 * (b1 + b2);
            ++changed;
        }
        quiet = changed == 0 ? quiet + 1 : 0;
    }
    m.converged = quiet >= cfg.max_quiet_passes;
    return m;
}

}  // namespace

SvmResult svm_classify(const Eigen::MatrixXd& train, const std::vector<int>& labels,
                       const Eigen::MatrixXd& test, const SvmConfig& config) {
    if (train.rows() == 0) throw EmptyTrain("no training points");
    if (static_cast<Eigen::Index>(labels.size()) != train.rows())
        throw ValueError("label count does not match training points");
    if (test.cols() != train.cols()) throw DimensionError("train/test feature width mismatch");
    if (config.c <= 0.0 || config.tol <= 0.0) throw ValueError("C and tolerance must be positive");

    std::array<bool, kNumClasses> present{};
    for (const int y : labels) {
        if (y < 0 || y >= kNumClasses) throw ValueError("class id out of range");
        present[y] = true;
    }
    if (std::count(present.begin(), present.end(), true) < 2)
        throw ValueError("one-vs-rest needs at least two classes present");

    double gamma = config.gamma;
    if (gamma <= 0.0) {
        const Eigen::RowVectorXd mean = train.colwise().mean();
        const double var =
            (train.rowwise() - mean).squaredNorm() /
            static_cast<double>(std::max<Eigen::Index>(1, train.rows() - 1) * train.cols());
        gamma = var > 0.0 ? 1.0 / (static_cast<double>(train.cols()) * var)
                          : 1.0 / static_cast<double>(train.cols());
    }

    const Eigen::MatrixXd k_train = rbf_kernel(train, train, gamma);
    const Eigen::MatrixXd k_test = rbf_kernel(test, train, gamma);

    SvmResult result;
    Eigen::MatrixXd decision =
        Eigen::MatrixXd::Constant(test.rows(), kNumClasses, std::numeric_limits<double>::lowest());
    for (int c = 0; c < kNumClasses; ++c) {
        if (!present[c]) continue;
        Eigen::VectorXd y(train.rows());
        for (Eigen::Index i = 0; i < train.rows(); ++i) y(i) = labels[static_cast<std::size_t>(i)] == c ? 1.0 : -1.0;
        Rng rng(mix_seed(config.seed, "svm:" + std::to_string(c)));
        const auto model = smo_train(k_train, y, config, rng);
        if (!model.converged) {
            result.converged = false;
            std::cerr << "warning: SVM class " << c << " hit the sweep bound before converging\n";
        }
        decision.col(c) = (k_test * (model.alpha.array() * y.array()).matrix()).array() + model.b;
    }

    result.predictions.resize(static_cast<std::size_t>(test.rows()));
    for (Eigen::Index q = 0; q < test.rows(); ++q) {
        int best = 0;
        for (int c = 1; c < kNumClasses; ++c)
            if (decision(q, c) > decision(q, best)) best = c;
        result.predictions[static_cast<std::size_t>(q)] = best;
    }
    return result;
}

ReprExport export_representations(const ModelBundle& bundle, const Dataset& dataset) {
    ReprExport rep;
    const auto& snaps = dataset.snapshots;
    rep.coords = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(snaps.size()), 2);
    if (snaps.empty()) return rep;

    Eigen::MatrixXd repr(static_cast<Eigen::Index>(snaps.size()), kReprWidth);
    constexpr int kBatch = 64;
    for (std::size_t begin = 0; begin < snaps.size(); begin += kBatch) {
        const std::size_t end = std::min(begin + kBatch, snaps.size());
        std::vector<int> batch(end - begin);
        std::iota(batch.begin(), batch.end(), static_cast<int>(begin));
        const auto z = encode(bundle.model, snapshots_to_tensor<float>(snaps, batch));
        for (std::size_t i = 0; i < batch.size(); ++i)
            for (int d = 0; d < kReprWidth; ++d)
                repr(static_cast<Eigen::Index>(begin + i), d) = z.at(static_cast<int>(i), 0, 0, d);
    }

    const int k = static_cast<int>(std::min<Eigen::Index>(2, std::min(repr.rows(), repr.cols())));
    const auto pca = pca_project(repr, k);
    rep.coords.leftCols(k) = pca.scores;
    for (const auto& s : snaps) {
        rep.labels.push_back(static_cast<int>(s.label));
        rep.source_ids.push_back(s.source_id);
    }
    return rep;
}

void write_repr_csv(const ReprExport& rep, std::ostream& out) {
    out << "x,y,class,source_id\n";
    const auto n = static_cast<std::size_t>(rep.coords.rows());
    if (rep.labels.size() != n || rep.source_ids.size() != n)
        throw DimensionError("export rows disagree with label count");
    out.precision(9);
    for (std::size_t i = 0; i < n; ++i)
        out << rep.coords(static_cast<Eigen::Index>(i), 0) << ','
            << rep.coords(static_cast<Eigen::Index>(i), 1) << ',' << rep.labels[i] << ','
            << rep.source_ids[i] << '\n';
}

}  // namespace pmuev
