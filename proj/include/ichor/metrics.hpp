// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

namespace ichor {

struct ClassificationMetrics {
  double auc = 0.0;
  double accuracy = 0.0;
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_flagged = false;  // zero denominator reported as 0
  bool recall_flagged = false;
  bool f1_flagged = false;
  long tp = 0, fp = 0, tn = 0, fn = 0;
};

struct RegressionMetrics {
  double mse = 0.0;
  double rmse = 0.0;
  double mae = 0.0;
  double r2 = 0.0;
  double pearson = 0.0;
};

/// Mann-Whitney AUC with the midrank tie convention.
double auc_score(const std::vector<double>& scores, const std::vector<int>& labels);

/// Confusion-matrix metrics at the given score threshold (score >= threshold
/// predicts positive). Zero-denominator precision/recall/F1 come back as 0
/// with the matching flag set; this function itself never throws on valid
/// binary labels. The auc field is left at 0.
ClassificationMetrics classification_metrics(const std::vector<double>& scores,
                                             const std::vector<int>& labels,
                                             double threshold = 0.5);

/// classification_metrics plus the AUC (which requires both classes).
ClassificationMetrics classification_record(const std::vector<double>& scores,
                                            const std::vector<int>& labels,
                                            double threshold = 0.5);

double mse_score(const std::vector<double>& preds, const std::vector<double>& targets);
double mae_score(const std::vector<double>& preds, const std::vector<double>& targets);
double r2_score(const std::vector<double>& preds, const std::vector<double>& targets);
double pearson_corr(const std::vector<double>& preds, const std::vector<double>& targets);
RegressionMetrics regression_metrics(const std::vector<double>& preds,
                                     const std::vector<double>& targets);

}  // namespace ichor
