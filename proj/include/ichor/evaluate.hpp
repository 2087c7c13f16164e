// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "ichor/config.hpp"
#include "ichor/cv.hpp"
#include "ichor/dataset.hpp"
#include "ichor/finetune.hpp"
#include "ichor/metrics.hpp"

namespace ichor {

struct CVReport {
  std::string task;  // "classification" or "regression"
  std::vector<ClassificationMetrics> cls_folds;
  std::vector<RegressionMetrics> reg_folds;
  ClassificationMetrics cls_mean;  // flags are set when any fold was flagged
  RegressionMetrics reg_mean;
  std::uint64_t eval_seed = 0;
  std::uint64_t finetune_seed = 0;
  std::string config_hash;

  /// {task, folds, mean, seeds, config_hash}; metrics stay unit-interval.
  nlohmann::json to_json() const;

  /// Text table with one row per fold plus the mean, values in percent.
  std::string table() const;
};

nlohmann::json classification_json(const ClassificationMetrics& m);
nlohmann::json regression_json(const RegressionMetrics& m);

/// Builds the outer/inner split plan for the dataset's task: labels
/// stratify classification, quantile bins stratify regression.
FoldPlan plan_folds(const Dataset& data, ManifestPurpose purpose, int k, std::uint64_t seed);

/// Nested stratified k-fold evaluation over one frozen base: per outer fold
/// adapters are trained on the inner split and scored on the held-out fold.
/// Writes folds.jsonl (the split audit), report.json, and report.txt.
CVReport run_nested_cv(const RunConfig& cfg, const Dataset& data, const MaeModel<float>& base,
                       const std::filesystem::path& out_dir);

}  // namespace ichor
