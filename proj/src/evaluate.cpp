// SPDX-License-Identifier: Apache-2.0

#include "ichor/evaluate.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>

#include "ichor/rng.hpp"

namespace ichor {

nlohmann::json classification_json(const ClassificationMetrics& m) {
  return {{"auc", m.auc},
          {"accuracy", m.accuracy},
          {"precision", m.precision},
          {"recall", m.recall},
          {"f1", m.f1},
          {"precision_flagged", m.precision_flagged},
          {"recall_flagged", m.recall_flagged},
          {"f1_flagged", m.f1_flagged}};
}

nlohmann::json regression_json(const RegressionMetrics& m) {
  return {{"mse", m.mse}, {"mae", m.mae}, {"rmse", m.rmse}, {"r2", m.r2}, {"pearson", m.pearson}};
}

nlohmann::json CVReport::to_json() const {
  nlohmann::json folds = nlohmann::json::array();
  nlohmann::json mean;
  if (task == "classification") {
    for (const auto& m : cls_folds) folds.push_back(classification_json(m));
    mean = classification_json(cls_mean);
  } else {
    for (const auto& m : reg_folds) folds.push_back(regression_json(m));
    mean = regression_json(reg_mean);
  }
  return {{"task", task},
          {"folds", folds},
          {"mean", mean},
          {"seeds", {{"eval", eval_seed}, {"finetune", finetune_seed}}},
          {"config_hash", config_hash}};
}

namespace {

std::string pct(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%8.2f", v * 100.0);
  return buf;
}

void table_row(std::string& out, const std::string& name, const std::vector<double>& vals) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%-6s", name.c_str());
  out += buf;
  for (double v : vals) out += pct(v);
  out += "\n";
}

}  // namespace

std::string CVReport::table() const {
  std::string out;
  const bool cls = task == "classification";
  out += "Fold  ";
  for (const char* h : cls ? std::vector<const char*>{"AUC", "Acc", "Prec", "Rec", "F1"}
                           : std::vector<const char*>{"MSE", "MAE", "RMSE", "R2", "PC"}) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%8s", h);
    out += buf;
  }
  out += "\n";
  const std::size_t n = cls ? cls_folds.size() : reg_folds.size();
  for (std::size_t f = 0; f < n; ++f) {
    if (cls) {
      const auto& m = cls_folds[f];
      table_row(out, std::to_string(f + 1), {m.auc, m.accuracy, m.precision, m.recall, m.f1});
    } else {
      const auto& m = reg_folds[f];
      table_row(out, std::to_string(f + 1), {m.mse, m.mae, m.rmse, m.r2, m.pearson});
    }
  }
  if (cls)
    table_row(out, "Mean",
              {cls_mean.auc, cls_mean.accuracy, cls_mean.precision, cls_mean.recall, cls_mean.f1});
  else
    table_row(out, "Mean",
              {reg_mean.mse, reg_mean.mae, reg_mean.rmse, reg_mean.r2, reg_mean.pearson});
  out += "(Unit: %)\n";
  return out;
}

FoldPlan plan_folds(const Dataset& data, ManifestPurpose purpose, int k, std::uint64_t seed) {
  std::vector<int> strata;
  strata.reserve(data.entries.size());
  if (purpose == ManifestPurpose::classification) {
    for (const auto& e : data.entries) {
      if (!e.label) throw DataError("'" + e.path + "' is missing a label");
      strata.push_back(*e.label);
    }
  } else if (purpose == ManifestPurpose::regression) {
    std::vector<double> targets;
    targets.reserve(data.entries.size());
    for (const auto& e : data.entries) {
      if (!e.score) throw DataError("'" + e.path + "' is missing a score");
      targets.push_back(*e.score);
    }
    strata = quantile_bins(targets, 5);
  } else {
    throw ConfigError("cross-validation requires a labeled manifest");
  }
  return stratified_kfold(strata, k, seed);
}

CVReport run_nested_cv(const RunConfig& cfg, const Dataset& data, const MaeModel<float>& base,
                       const std::filesystem::path& out_dir) {
  const ManifestPurpose purpose = infer_purpose(data.entries);
  const bool cls = purpose == ManifestPurpose::classification;
  const FoldPlan plan = plan_folds(data, purpose, cfg.eval.k, cfg.eval.seed);
  std::filesystem::create_directories(out_dir);

  std::ofstream audit(out_dir / "folds.jsonl");
  if (!audit) throw DataError("cannot open fold audit log in '" + out_dir.string() + "'");
  for (int f = 0; f < plan.k; ++f) {
    audit << nlohmann::json{{"fold", f},
                            {"test", plan.outer[static_cast<std::size_t>(f)]},
                            {"inner_train", plan.inner[static_cast<std::size_t>(f)].first},
                            {"inner_val", plan.inner[static_cast<std::size_t>(f)].second}}
                 .dump()
          << "\n";
  }
  audit.flush();

  CVReport report;
  report.task = cls ? "classification" : "regression";
  report.eval_seed = cfg.eval.seed;
  report.finetune_seed = cfg.finetune.seed;
  report.config_hash = cfg.config_hash();

  for (int f = 0; f < plan.k; ++f) {
    try {
      RunConfig fold_cfg = cfg;
      fold_cfg.finetune.seed = mix64(cfg.finetune.seed, static_cast<std::uint64_t>(f));
      char name[16];
      std::snprintf(name, sizeof name, "fold%d", f);
      const AdaptedModel adapted =
          run_finetune(fold_cfg, data, plan.inner[static_cast<std::size_t>(f)].first,
                       plan.inner[static_cast<std::size_t>(f)].second, purpose, base,
                       out_dir / name);

      std::vector<double> scores, targets;
      std::vector<int> labels;
      for (int i : plan.outer[static_cast<std::size_t>(f)]) {
        const std::size_t u = static_cast<std::size_t>(i);
        scores.push_back(
            score_volume(data.volumes[u], base, adapted.adapters, adapted.head));
        if (cls)
          labels.push_back(*data.entries[u].label);
        else
          targets.push_back(*data.entries[u].score);
      }
      if (cls)
        report.cls_folds.push_back(classification_record(scores, labels));
      else
        report.reg_folds.push_back(regression_metrics(scores, targets));
    } catch (const Error& e) {
      throw Error(e.kind(), "fold " + std::to_string(f) + ": " + e.what());
    }
  }

  const double inv_k = 1.0 / static_cast<double>(plan.k);
  if (cls) {
    for (const auto& m : report.cls_folds) {
      report.cls_mean.auc += m.auc * inv_k;
      report.cls_mean.accuracy += m.accuracy * inv_k;
      report.cls_mean.precision += m.precision * inv_k;
      report.cls_mean.recall += m.recall * inv_k;
      report.cls_mean.f1 += m.f1 * inv_k;
      report.cls_mean.precision_flagged |= m.precision_flagged;
      report.cls_mean.recall_flagged |= m.recall_flagged;
      report.cls_mean.f1_flagged |= m.f1_flagged;
    }
  } else {
    for (const auto& m : report.reg_folds) {
      report.reg_mean.mse += m.mse * inv_k;
      report.reg_mean.rmse += m.rmse * inv_k;
      report.reg_mean.mae += m.mae * inv_k;
      report.reg_mean.r2 += m.r2 * inv_k;
      report.reg_mean.pearson += m.pearson * inv_k;
    }
  }

  std::ofstream json_out(out_dir / "report.json");
  json_out << report.to_json().dump(2) << "\n";
  std::ofstream text_out(out_dir / "report.txt");
  text_out << report.table();
  return report;
}

}  // namespace ichor
