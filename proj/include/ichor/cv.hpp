// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <utility>
#include <vector>

namespace ichor {

struct FoldPlan {
  int k = 5;
  std::vector<std::vector<int>> outer;  // disjoint test sets covering the dataset
  // Per outer fold: stratified 80/20 split of the remaining indices.
  std::vector<std::pair<std::vector<int>, std::vector<int>>> inner;  // (train, val)
};

/// Deterministic stratified k-fold split. Per stratum, members are shuffled
/// and dealt evenly; the remainder goes to the currently smallest folds, so
/// per-fold counts differ from the proportional share by at most one.
/// Every stratum needs at least k members.
FoldPlan stratified_kfold(const std::vector<int>& strata, int k, std::uint64_t seed);

/// Deterministic stratified 80/20 split over all samples, for a single
/// train/validation fit. Returns (train, val), both sorted.
std::pair<std::vector<int>, std::vector<int>> stratified_holdout(const std::vector<int>& strata,
                                                                 std::uint64_t seed);

/// Contiguous near-equal quantile groups of the sorted targets; used to
/// stratify regression targets. Returns the bin id of every sample.
std::vector<int> quantile_bins(const std::vector<double>& targets, int bins);

}  // namespace ichor
