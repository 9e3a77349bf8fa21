#include "pmuev/augment.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace pmuev {

std::vector<Snapshot> sample_snapshots(const PqvfTensor& tensor, const AugmentPolicy& policy,
                                       int source_id, std::uint64_t seed) {
    if (!tensor.label) throw ValueError("tensor has no class label");
    const int t_s = static_cast<int>(std::llround(policy.window_s * tensor.sample_rate_hz));
    if (t_s < 1) throw ValueError("snapshot window too short");
    if (t_s > tensor.t_len) throw WindowTooLong("snapshot window exceeds parent tensor");

    const int k = policy.per_class_samples[static_cast<int>(*tensor.label)];
    if (k < 1) throw ValueError("per-class sample count must be >= 1");

    Rng rng(mix_seed(seed, "offsets"));
    std::vector<Snapshot> out;
    out.reserve(k);
    for (int i = 0; i < k; ++i) {
        const int offset = static_cast<int>(rng.uniform_int(0, tensor.t_len - t_s));
        Snapshot s;
        s.t_len = t_s;
        s.n_pmus = tensor.n_pmus;
        s.sample_rate_hz = tensor.sample_rate_hz;
        s.label = *tensor.label;
        s.source_id = source_id;
        s.offset_index = offset;
        const std::size_t stride = static_cast<std::size_t>(tensor.n_pmus) * kNumChannels;
        s.data.assign(tensor.data.begin() + static_cast<std::ptrdiff_t>(offset * stride),
                      tensor.data.begin() + static_cast<std::ptrdiff_t>((offset + t_s) * stride));
        out.push_back(std::move(s));
    }
    return out;
}

std::array<long, kNumClasses> rebalance_counts(const std::array<long, kNumClasses>& class_sizes,
                                               const AugmentPolicy& policy) {
    std::array<long, kNumClasses> out{};
    for (int c = 0; c < kNumClasses; ++c) out[c] = class_sizes[c] * policy.per_class_samples[c];
    return out;
}

namespace {

std::array<std::vector<int>, kNumClasses> by_class(const std::vector<PqvfTensor>& tensors) {
    std::array<std::vector<int>, kNumClasses> groups;
    for (std::size_t i = 0; i < tensors.size(); ++i) {
        if (!tensors[i].label) throw ValueError("tensor " + std::to_string(i) + " has no class label");
        groups[static_cast<int>(*tensors[i].label)].push_back(static_cast<int>(i));
    }
    return groups;
}

}  // namespace

SplitIndices split_dataset(const std::vector<PqvfTensor>& tensors, double test_fraction,
                           std::uint64_t seed) {
    if (test_fraction <= 0.0 || test_fraction >= 1.0) throw ValueError("test fraction must be in (0,1)");
    auto groups = by_class(tensors);

    SplitIndices split;
    for (int c = 0; c < kNumClasses; ++c) {
        auto& group = groups[c];
        if (group.empty()) continue;
        if (group.size() < 2) throw ClassTooSmall("class " + std::string(to_string(static_cast<EventClass>(c))) + " has fewer than 2 tensors");
        Rng rng(mix_seed(seed, "split:" + std::to_string(c)));
        rng.shuffle(group);
        auto n_test = static_cast<std::size_t>(std::llround(test_fraction * static_cast<double>(group.size())));
        n_test = std::clamp<std::size_t>(n_test, 1, group.size() - 1);
        split.test.insert(split.test.end(), group.begin(), group.begin() + static_cast<std::ptrdiff_t>(n_test));
        split.train.insert(split.train.end(), group.begin() + static_cast<std::ptrdiff_t>(n_test), group.end());
    }
    std::sort(split.train.begin(), split.train.end());
    std::sort(split.test.begin(), split.test.end());
    return split;
}

std::vector<std::vector<int>> kfold_indices(const std::vector<PqvfTensor>& tensors, int k,
                                            std::uint64_t seed) {
    if (k < 2) throw ValueError("need at least 2 folds");
    auto groups = by_class(tensors);
    std::vector<std::vector<int>> folds(k);
    for (int c = 0; c < kNumClasses; ++c) {
        auto& group = groups[c];
        if (group.empty()) continue;
        if (static_cast<int>(group.size()) < k)
            throw ClassTooSmall("class " + std::string(to_string(static_cast<EventClass>(c))) + " has fewer tensors than folds");
        Rng rng(mix_seed(seed, "fold:" + std::to_string(c)));
        rng.shuffle(group);
        for (std::size_t i = 0; i < group.size(); ++i) folds[i % k].push_back(group[i]);
    }
    for (auto& fold : folds) std::sort(fold.begin(), fold.end());
    return folds;
}

Dataset build_snapshot_dataset(const std::vector<PqvfTensor>& tensors,
                               const std::vector<int>& indices, const AugmentPolicy& policy,
                               std::uint64_t seed) {
    Dataset dataset;
    for (const int idx : indices) {
        if (idx < 0 || idx >= static_cast<int>(tensors.size())) throw ValueError("parent index out of range");
        auto snaps = sample_snapshots(tensors[idx], policy, idx, mix_seed(seed, "aug:" + std::to_string(idx)));
        for (auto& s : snaps) dataset.snapshots.push_back(std::move(s));
    }
    dataset.recount();
    return dataset;
}

}  // namespace pmuev
