// SPDX-License-Identifier: Apache-2.0

#include "ichor/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "ichor/errors.hpp"

namespace ichor {

namespace {

void check_binary(const std::vector<double>& scores, const std::vector<int>& labels) {
  if (scores.empty()) throw DataError("metric input is empty");
  if (scores.size() != labels.size()) throw DataError("scores and labels differ in length");
  for (int y : labels) {
    if (y != 0 && y != 1) throw DataError("labels must be 0 or 1, got " + std::to_string(y));
  }
}

}  // namespace

double auc_score(const std::vector<double>& scores, const std::vector<int>& labels) {
  check_binary(scores, labels);
  const long n = static_cast<long>(scores.size());
  const long n_pos = std::count(labels.begin(), labels.end(), 1);
  const long n_neg = n - n_pos;
  if (n_pos == 0 || n_neg == 0)
    throw UndefinedMetricError("AUC needs both classes, got " + std::to_string(n_pos) +
                               " positives out of " + std::to_string(n));
  std::vector<long> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&scores](long a, long b) { return scores[a] < scores[b]; });
  // Average ranks over tied score runs (1-based midranks).
  std::vector<double> rank(n);
  long i = 0;
  while (i < n) {
    long j = i;
    while (j + 1 < n && scores[order[j + 1]] == scores[order[i]]) ++j;
    const double mid = 0.5 * static_cast<double>((i + 1) + (j + 1));
    for (long t = i; t <= j; ++t) rank[order[t]] = mid;
    i = j + 1;
  }
  double rank_sum_pos = 0.0;
  for (long t = 0; t < n; ++t)
    if (labels[t] == 1) rank_sum_pos += rank[t];
  const double u = rank_sum_pos - 0.5 * static_cast<double>(n_pos) * (n_pos + 1);
  return u / (static_cast<double>(n_pos) * static_cast<double>(n_neg));
}

ClassificationMetrics classification_metrics(const std::vector<double>& scores,
                                             const std::vector<int>& labels, double threshold) {
  check_binary(scores, labels);
  ClassificationMetrics m;
  for (std::size_t t = 0; t < scores.size(); ++t) {
    const int pred = scores[t] >= threshold ? 1 : 0;
    if (pred == 1 && labels[t] == 1) ++m.tp;
    if (pred == 1 && labels[t] == 0) ++m.fp;
    if (pred == 0 && labels[t] == 0) ++m.tn;
    if (pred == 0 && labels[t] == 1) ++m.fn;
  }
  const double n = static_cast<double>(scores.size());
  m.accuracy = (m.tp + m.tn) / n;
  if (m.tp + m.fp > 0) {
    m.precision = static_cast<double>(m.tp) / (m.tp + m.fp);
  } else {
    m.precision_flagged = true;
  }
  if (m.tp + m.fn > 0) {
    m.recall = static_cast<double>(m.tp) / (m.tp + m.fn);
  } else {
    m.recall_flagged = true;
  }
  if (m.precision + m.recall > 0.0) {
    m.f1 = 2.0 * m.precision * m.recall / (m.precision + m.recall);
  } else {
    m.f1_flagged = true;
  }
  return m;
}

ClassificationMetrics classification_record(const std::vector<double>& scores,
                                            const std::vector<int>& labels, double threshold) {
  ClassificationMetrics m = classification_metrics(scores, labels, threshold);
  m.auc = auc_score(scores, labels);
  return m;
}

namespace {

void check_pair(const std::vector<double>& preds, const std::vector<double>& targets) {
  if (preds.size() != targets.size()) throw DataError("preds and targets differ in length");
  if (preds.size() < 2) throw DataError("regression metrics need at least 2 samples");
}

bool is_constant(const std::vector<double>& xs) {
  return std::all_of(xs.begin(), xs.end(), [&xs](double x) { return x == xs.front(); });
}

}  // namespace

double mse_score(const std::vector<double>& preds, const std::vector<double>& targets) {
  check_pair(preds, targets);
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    const double d = preds[i] - targets[i];
    s += d * d;
  }
  return s / static_cast<double>(preds.size());
}

double mae_score(const std::vector<double>& preds, const std::vector<double>& targets) {
  check_pair(preds, targets);
  double s = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) s += std::abs(preds[i] - targets[i]);
  return s / static_cast<double>(preds.size());
}

double r2_score(const std::vector<double>& preds, const std::vector<double>& targets) {
  check_pair(preds, targets);
  if (is_constant(targets)) throw UndefinedMetricError("R^2 is undefined for constant targets");
  const double mean =
      std::accumulate(targets.begin(), targets.end(), 0.0) / static_cast<double>(targets.size());
  double ss_res = 0.0, ss_tot = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    ss_res += (preds[i] - targets[i]) * (preds[i] - targets[i]);
    ss_tot += (targets[i] - mean) * (targets[i] - mean);
  }
  if (ss_tot == 0.0) throw UndefinedMetricError("R^2 is undefined for constant targets");
  return 1.0 - ss_res / ss_tot;
}

double pearson_corr(const std::vector<double>& preds, const std::vector<double>& targets) {
  check_pair(preds, targets);
  if (is_constant(preds) || is_constant(targets))
    throw UndefinedMetricError("Pearson correlation is undefined for a constant sequence");
  const double n = static_cast<double>(preds.size());
  const double mp = std::accumulate(preds.begin(), preds.end(), 0.0) / n;
  const double mt = std::accumulate(targets.begin(), targets.end(), 0.0) / n;
  double cov = 0.0, vp = 0.0, vt = 0.0;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    cov += (preds[i] - mp) * (targets[i] - mt);
    vp += (preds[i] - mp) * (preds[i] - mp);
    vt += (targets[i] - mt) * (targets[i] - mt);
  }
  if (vp == 0.0 || vt == 0.0)
    throw UndefinedMetricError("Pearson correlation is undefined for a constant sequence");
  return cov / std::sqrt(vp * vt);
}

RegressionMetrics regression_metrics(const std::vector<double>& preds,
                                     const std::vector<double>& targets) {
  RegressionMetrics m;
  m.mse = mse_score(preds, targets);
  m.rmse = std::sqrt(m.mse);
  m.mae = mae_score(preds, targets);
  m.r2 = r2_score(preds, targets);
  m.pearson = pearson_corr(preds, targets);
  return m;
}

}  // namespace ichor
