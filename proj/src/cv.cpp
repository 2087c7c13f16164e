// SPDX-License-Identifier: Apache-2.0

#include "ichor/cv.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numeric>
#include <string>

#include "ichor/errors.hpp"
#include "ichor/rng.hpp"

namespace ichor {

namespace {

void shuffle_indices(std::vector<int>& idx, Rng& rng) {
  for (std::size_t i = idx.size(); i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.below(i));
    std::swap(idx[i - 1], idx[j]);
  }
}

/// Splits one stratum's (already shuffled) members over k buckets; extras go
/// to the buckets that are currently smallest, ties broken by bucket id.
void deal_stratum(const std::vector<int>& members, std::vector<std::vector<int>>& buckets) {
  const int k = static_cast<int>(buckets.size());
  const int base = static_cast<int>(members.size()) / k;
  const int rem = static_cast<int>(members.size()) % k;
  std::vector<int> order(k);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&buckets](int a, int b) {
    return buckets[a].size() < buckets[b].size();
  });
  std::vector<int> take(k, base);
  for (int r = 0; r < rem; ++r) ++take[order[r]];
  std::size_t next = 0;
  for (int f = 0; f < k; ++f)
    for (int t = 0; t < take[f]; ++t) buckets[f].push_back(members[next++]);
}

std::map<int, std::vector<int>> group_by_stratum(const std::vector<int>& strata,
                                                 const std::vector<int>& subset) {
  std::map<int, std::vector<int>> groups;
  for (int i : subset) groups[strata[i]].push_back(i);
  return groups;
}

}  // namespace

FoldPlan stratified_kfold(const std::vector<int>& strata, int k, std::uint64_t seed) {
  if (k < 2) throw ConfigError("k-fold needs k >= 2");
  if (strata.size() < static_cast<std::size_t>(k))
    throw StratificationError("fewer samples than folds");

  std::vector<int> all(strata.size());
  std::iota(all.begin(), all.end(), 0);
  auto groups = group_by_stratum(strata, all);
  for (const auto& [value, members] : groups) {
    if (members.size() < static_cast<std::size_t>(k))
      throw StratificationError("stratum " + std::to_string(value) + " has only " +
                                std::to_string(members.size()) + " members for k=" +
                                std::to_string(k));
  }

  FoldPlan plan;
  plan.k = k;
  plan.outer.assign(k, {});
  Rng rng(mix64(seed, 0x6b666f6c64ULL));
  for (auto& [value, members] : groups) {
    shuffle_indices(members, rng);
    deal_stratum(members, plan.outer);
  }
  for (auto& fold : plan.outer) std::sort(fold.begin(), fold.end());

  plan.inner.resize(k);
  for (int f = 0; f < k; ++f) {
    std::vector<int> pool;
    for (int g = 0; g < k; ++g)
      if (g != f) pool.insert(pool.end(), plan.outer[g].begin(), plan.outer[g].end());
    Rng inner_rng(mix64(seed, 0x696e6e6572ULL, static_cast<std::uint64_t>(f)));
    auto pool_groups = group_by_stratum(strata, pool);
    auto& [train, val] = plan.inner[f];
    for (auto& [value, members] : pool_groups) {
      if (members.size() < 2)
        throw StratificationError("stratum " + std::to_string(value) +
                                  " cannot be split 80/20 with " +
                                  std::to_string(members.size()) + " members");
      shuffle_indices(members, inner_rng);
      auto n_val = static_cast<std::size_t>(
          std::llround(0.2 * static_cast<double>(members.size())));
      n_val = std::clamp<std::size_t>(n_val, 1, members.size() - 1);
      val.insert(val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
      train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val),
                   members.end());
    }
    std::sort(train.begin(), train.end());
    std::sort(val.begin(), val.end());
  }
  return plan;
}

std::pair<std::vector<int>, std::vector<int>> stratified_holdout(const std::vector<int>& strata,
                                                                 std::uint64_t seed) {
  std::vector<int> all(strata.size());
  std::iota(all.begin(), all.end(), 0);
  auto groups = group_by_stratum(strata, all);
  Rng rng(mix64(seed, 0x686f6c64ULL));
  std::pair<std::vector<int>, std::vector<int>> split;
  auto& [train, val] = split;
  for (auto& [value, members] : groups) {
    if (members.size() < 2)
      throw StratificationError("stratum " + std::to_string(value) +
                                " cannot be split 80/20 with " + std::to_string(members.size()) +
                                " members");
    shuffle_indices(members, rng);
    auto n_val =
        static_cast<std::size_t>(std::llround(0.2 * static_cast<double>(members.size())));
    n_val = std::clamp<std::size_t>(n_val, 1, members.size() - 1);
    val.insert(val.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(n_val));
    train.insert(train.end(), members.begin() + static_cast<std::ptrdiff_t>(n_val), members.end());
  }
  std::sort(train.begin(), train.end());
  std::sort(val.begin(), val.end());
  return split;
}

std::vector<int> quantile_bins(const std::vector<double>& targets, int bins) {
  if (bins < 1) throw ConfigError("quantile binning needs at least 1 bin");
  if (targets.size() < static_cast<std::size_t>(bins))
    throw StratificationError("fewer samples than quantile bins");
  std::vector<int> order(targets.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&targets](int a, int b) { return targets[a] < targets[b]; });
  const std::size_t base = targets.size() / static_cast<std::size_t>(bins);
  const std::size_t rem = targets.size() % static_cast<std::size_t>(bins);
  std::vector<int> bin_of(targets.size());
  std::size_t next = 0;
  for (int b = 0; b < bins; ++b) {
    const std::size_t take = base + (static_cast<std::size_t>(b) < rem ? 1 : 0);
    for (std::size_t t = 0; t < take; ++t) bin_of[order[next++]] = b;
  }
  return bin_of;
}

}  // namespace ichor
