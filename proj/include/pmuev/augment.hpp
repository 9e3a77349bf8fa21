#pragma once

// Class rebalancing by uniform sub-tensor sampling, plus parent-level
// train/test splitting so no snapshot in train shares a parent with test.

#include <array>
#include <vector>

#include "pmuev/common.hpp"
#include "pmuev/core.hpp"

namespace pmuev {

struct AugmentPolicy {
    double window_s = 12.0;
    std::array<int, kNumClasses> per_class_samples = {6, 1, 9, 6};
};

std::vector<Snapshot> sample_snapshots(const PqvfTensor& tensor, const AugmentPolicy& policy,
                                       int source_id, std::uint64_t seed);

std::array<long, kNumClasses> rebalance_counts(const std::array<long, kNumClasses>& class_sizes,
                                               const AugmentPolicy& policy);

struct SplitIndices {
    std::vector<int> train;
    std::vector<int> test;
};

// Stratified split over parent tensors, before any snapshot sampling.
SplitIndices split_dataset(const std::vector<PqvfTensor>& tensors, double test_fraction,
                           std::uint64_t seed);

// Stratified parent-level folds; fold f is the held-out set of round f.
std::vector<std::vector<int>> kfold_indices(const std::vector<PqvfTensor>& tensors, int k,
                                            std::uint64_t seed);

// Snapshots for the chosen parents, with source_id = parent index.
Dataset build_snapshot_dataset(const std::vector<PqvfTensor>& tensors,
                               const std::vector<int>& indices, const AugmentPolicy& policy,
                               std::uint64_t seed);

}  // namespace pmuev
