// SPDX-License-Identifier: Apache-2.0

#include "ichor/cli.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <Eigen/Core>
#ifdef _OPENMP
#include <omp.h>
#endif

#include "ichor/evaluate.hpp"
#include "ichor/ivol.hpp"
#include "ichor/synth.hpp"
#include "ichor/train.hpp"

namespace ichor {

namespace {

void apply_thread_env() {
  const char* s = std::getenv("ICHOR_THREADS");
  if (!s || !*s) return;
  char* end = nullptr;
  const long t = std::strtol(s, &end, 10);
  if (end == s || *end != '\0' || t < 1)
    throw ConfigError("ICHOR_THREADS must be a positive integer");
  Eigen::setNbThreads(static_cast<int>(t));
#ifdef _OPENMP
  omp_set_num_threads(static_cast<int>(t));
#endif
}

std::string shape_str(const std::array<int, 3>& s) {
  return std::to_string(s[0]) + "x" + std::to_string(s[1]) + "x" + std::to_string(s[2]);
}

void check_grid(const MaeModel<float>& base, const std::array<int, 3>& shape) {
  if (base.vcfg.grid.volume_shape != shape)
    throw ShapeError("data shape " + shape_str(shape) + " does not match the model grid " +
                     shape_str(base.vcfg.grid.volume_shape));
}

RunConfig load_run_config(const std::string& path, const std::string& task_manifest) {
  RunConfig cfg = RunConfig::from_file(path);
  if (!task_manifest.empty()) cfg.data.manifest_path = task_manifest;
  cfg.validate();
  return cfg;
}

Dataset load_task_data(const RunConfig& cfg) {
  if (cfg.data.manifest_path.empty())
    throw ConfigError("data.manifest_path is required (config key or --task-manifest)");
  return load_dataset(load_manifest(cfg.data.manifest_path), cfg.data.format,
                      cfg.model.patch_size);
}

MaeModel<float> load_base(const RunConfig& cfg, const std::string& checkpoint, bool rand_init,
                          const std::array<int, 3>& shape) {
  if (rand_init) return build_random_base(cfg, shape, cfg.finetune.seed);
  if (checkpoint.empty()) throw ConfigError("--checkpoint is required unless --rand-init is set");
  MaeModel<float> base = load_pretrained(checkpoint);
  check_grid(base, shape);
  return base;
}

std::vector<int> task_strata(const Dataset& data, ManifestPurpose purpose) {
  std::vector<int> strata;
  strata.reserve(data.entries.size());
  if (purpose == ManifestPurpose::classification) {
    for (const auto& e : data.entries) strata.push_back(*e.label);
  } else {
    std::vector<double> targets;
    targets.reserve(data.entries.size());
    for (const auto& e : data.entries) targets.push_back(*e.score);
    strata = quantile_bins(targets, 5);
  }
  return strata;
}

int cmd_pretrain(const std::string& config, const std::string& out, bool dry) {
  RunConfig cfg = load_run_config(config, "");
  if (dry) {
    std::cout << cfg.to_json().dump(2) << "\n";
    return 0;
  }
  const PretrainResult r = run_pretraining(cfg, out);
  std::cout << "pretrained " << cfg.pretrain.epochs << " epochs, final epoch loss "
            << (r.epoch_losses.empty() ? 0.0 : r.epoch_losses.back()) << "\n"
            << "checkpoint: " << r.checkpoint_path.string() << "\n";
  return 0;
}

int cmd_finetune(const std::string& config, const std::string& checkpoint,
                 const std::string& task_manifest, const std::string& out, bool rand_init,
                 bool dry) {
  RunConfig cfg = load_run_config(config, task_manifest);
  if (dry) {
    std::cout << cfg.to_json().dump(2) << "\n";
    return 0;
  }
  const Dataset data = load_task_data(cfg);
  const ManifestPurpose purpose = infer_purpose(data.entries);
  if (purpose == ManifestPurpose::pretrain)
    throw ConfigError("fine-tuning requires a labeled manifest");
  const MaeModel<float> base = load_base(cfg, checkpoint, rand_init, data.shape);
  const auto [train, val] = stratified_holdout(task_strata(data, purpose), cfg.finetune.seed);
  const AdaptedModel adapted = run_finetune(cfg, data, train, val, purpose, base, out);
  const char* metric = purpose == ManifestPurpose::classification ? "AUC" : "MSE";
  std::cout << "best validation " << metric << " " << adapted.result.best_val_metric
            << " at epoch " << adapted.result.best_epoch << "\n"
            << "adapter checkpoint: " << adapted.result.checkpoint_path.string() << "\n";
  return 0;
}

int cmd_evaluate(const std::string& config, const std::string& checkpoint,
                 const std::string& task_manifest, const std::string& out, bool rand_init,
                 bool dry) {
  RunConfig cfg = load_run_config(config, task_manifest);
  if (dry) {
    std::cout << cfg.to_json().dump(2) << "\n";
    return 0;
  }
  const Dataset data = load_task_data(cfg);
  if (infer_purpose(data.entries) == ManifestPurpose::pretrain)
    throw ConfigError("evaluation requires a labeled manifest");
  const MaeModel<float> base = load_base(cfg, checkpoint, rand_init, data.shape);
  const CVReport report = run_nested_cv(cfg, data, base, out);
  std::cout << report.table();
  std::cout << "report: " << (std::filesystem::path(out) / "report.json").string() << "\n";
  return 0;
}

int cmd_reconstruct(const std::string& checkpoint, const std::string& volume, double rho,
                    std::uint64_t seed, const std::string& out) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw ConfigError("rho must lie in [0,1]");
  const MaeModel<float> model = load_pretrained(checkpoint);
  const Volume v = preprocess_volume(load_volume(volume, "auto"));
  check_grid(model, v.shape);

  auto [patches, grid] = patchify<float>(v, model.vcfg.patch_size);
  Rng mask_rng(mix64(seed, 0x6d61736bULL));
  const MaskPlan plan = sample_mask(grid.n_patches, rho, mask_rng);
  const TokenSeq<float> tokens = embed_visible(patches, plan, model.enc.patch_embed, model.enc_pe);
  TokenSeq<float> zv;
  zv.positions = tokens.positions;
  zv.values = encoder_forward<float>(tokens.values, model.enc, model.vcfg, nullptr, false, nullptr,
                                     nullptr);
  const Mat<float> u = assemble_decoder_sequence(zv, plan, model.dec, model.dec_pe);
  const Mat<float> pred = decode_and_predict(u, model.dec, model.dcfg,
                                             static_cast<DecoderCache<float>*>(nullptr));

  std::filesystem::create_directories(out);
  const std::filesystem::path out_dir(out);
  write_ivol(v, out_dir / "input.ivol");

  Mat<float> zeroed = patches;
  for (int i : plan.masked) zeroed.row(i).setZero();
  write_ivol(unpatchify(zeroed, grid, v.voxel_size_mm, v.unit), out_dir / "masked.ivol");

  // The exported volume must stay in the normalized range; the reported MSE
  // below uses the unclamped predictions.
  const Mat<float> clamped = pred.cwiseMax(0.f).cwiseMin(1.f);
  const Volume recon = stitch_reconstruction(v, clamped, plan, model.vcfg.patch_size);
  write_ivol(recon, out_dir / "recon.ivol");

  nlohmann::json summary = {{"rho", rho},
                            {"seed", seed},
                            {"n_patches", grid.n_patches},
                            {"n_masked", static_cast<int>(plan.masked.size())},
                            {"masked_mse", nullptr}};
  if (!plan.masked.empty())
    summary["masked_mse"] = static_cast<double>(masked_mse<float>(pred, patches, plan, nullptr));
  std::ofstream js(out_dir / "reconstruction.json");
  js << summary.dump(2) << "\n";
  std::cout << summary.dump(2) << "\n";
  return 0;
}

int cmd_sweep(const std::string& config, const std::string& rhos_csv,
              const std::string& task_manifest, const std::string& out, bool dry) {
  RunConfig cfg = load_run_config(config, "");
  std::vector<double> rhos;
  std::string tok;
  std::istringstream ss(rhos_csv);
  while (std::getline(ss, tok, ',')) {
    if (tok.empty()) continue;
    try {
      rhos.push_back(std::stod(tok));
    } catch (const std::exception&) {
      throw ConfigError("--rhos entry '" + tok + "' is not a number");
    }
    if (!(rhos.back() >= 0.0 && rhos.back() <= 1.0))
      throw ConfigError("--rhos entries must lie in [0,1]");
  }
  if (rhos.empty()) throw ConfigError("--rhos must list at least one value");
  if (dry) {
    std::cout << cfg.to_json().dump(2) << "\n";
    return 0;
  }
  if (task_manifest.empty()) throw ConfigError("--task-manifest is required");

  RunConfig task_cfg = cfg;
  task_cfg.data.manifest_path = task_manifest;
  const Dataset task_data = load_task_data(task_cfg);
  if (infer_purpose(task_data.entries) == ManifestPurpose::pretrain)
    throw ConfigError("the sweep task manifest must be labeled");
  const bool cls = infer_purpose(task_data.entries) == ManifestPurpose::classification;

  const std::filesystem::path out_dir(out);
  std::filesystem::create_directories(out_dir);
  nlohmann::json rows = nlohmann::json::array();
  std::string table;
  table += "rho   ";
  for (const char* h : cls ? std::vector<const char*>{"AUC", "Acc", "Prec", "Rec", "F1"}
                           : std::vector<const char*>{"MSE", "MAE", "RMSE", "R2", "PC"}) {
    char buf[16];
    std::snprintf(buf, sizeof buf, "%8s", h);
    table += buf;
  }
  table += "\n";

  for (double rho : rhos) {
    RunConfig rc = cfg;
    rc.pretrain.rho = rho;
    char name[24];
    std::snprintf(name, sizeof name, "rho_%.2f", rho);
    const std::filesystem::path rho_dir = out_dir / name;
    const PretrainResult pre = run_pretraining(rc, rho_dir);
    const MaeModel<float> base = load_pretrained(pre.checkpoint_path);
    check_grid(base, task_data.shape);
    rc.data.manifest_path = task_manifest;
    const CVReport report = run_nested_cv(rc, task_data, base, rho_dir / "eval");

    nlohmann::json row = {{"rho", rho},
                          {"pretrain_steps", static_cast<std::int64_t>(pre.step_losses.size())},
                          {"task", report.task},
                          {"mean", cls ? classification_json(report.cls_mean)
                                       : regression_json(report.reg_mean)}};
    rows.push_back(row);

    char buf[16];
    std::snprintf(buf, sizeof buf, "%-6.2f", rho);
    table += buf;
    const std::vector<double> vals =
        cls ? std::vector<double>{report.cls_mean.auc, report.cls_mean.accuracy,
                                  report.cls_mean.precision, report.cls_mean.recall,
                                  report.cls_mean.f1}
            : std::vector<double>{report.reg_mean.mse, report.reg_mean.mae, report.reg_mean.rmse,
                                  report.reg_mean.r2, report.reg_mean.pearson};
    for (double v : vals) {
      char cell[16];
      std::snprintf(cell, sizeof cell, "%8.2f", v * 100.0);
      table += cell;
    }
    table += "\n";
  }
  table += "(Unit: %)\n";

  const nlohmann::json doc = {
      {"rhos", rhos}, {"rows", rows}, {"config_hash", cfg.config_hash()}};
  std::ofstream js(out_dir / "sweep.json");
  js << doc.dump(2) << "\n";
  std::ofstream txt(out_dir / "sweep.txt");
  txt << table;
  std::cout << table;
  return 0;
}

int cmd_synth(int n, const std::string& kind, double noise, std::uint64_t seed,
              const std::string& out_dir, int grid) {
  SynthConfig sc;
  sc.n = n;
  if (kind == "class")
    sc.kind = PhantomKind::lesion;
  else if (kind == "quality")
    sc.kind = PhantomKind::quality;
  else if (kind == "pretrain")
    sc.kind = PhantomKind::pretrain;
  else
    throw ConfigError("--kind must be class, quality, or pretrain");
  if (grid < 1) throw ConfigError("--grid must be positive");
  sc.grid = {grid, grid, grid};
  sc.noise = static_cast<float>(noise);
  sc.seed = seed;
  const std::filesystem::path manifest = write_synth_dataset(sc, out_dir);
  std::cout << "wrote " << n << " volumes\nmanifest: " << manifest.string() << "\n";
  return 0;
}

}  // namespace

int run_cli(int argc, char** argv) {
  try {
    apply_thread_env();

    CLI::App app{"ICHOR: masked-autoencoder pretraining and LoRA adaptation for "
                 "volumetric perfusion maps"};
    app.require_subcommand(1);
    int rc = 0;

    std::string config, checkpoint, task_manifest, out, volume;
    bool dry = false, rand_init = false;

    auto* pre = app.add_subcommand("pretrain", "Self-supervised masked-autoencoder pretraining");
    pre->add_option("--config", config, "JSON run configuration")->required();
    pre->add_option("--out", out, "output directory")->required();
    pre->add_flag("--dry-run", dry, "print the resolved configuration and exit");
    pre->callback([&] { rc = cmd_pretrain(config, out, dry); });

    auto* fin = app.add_subcommand("finetune", "Single LoRA fine-tuning fit with an 80/20 split");
    fin->add_option("--config", config, "JSON run configuration")->required();
    fin->add_option("--checkpoint", checkpoint, "pretraining checkpoint (.ichk)");
    fin->add_option("--task-manifest", task_manifest, "labeled manifest (overrides the config)");
    fin->add_option("--out", out, "output directory")->required();
    fin->add_flag("--rand-init", rand_init, "use a randomly initialized frozen base");
    fin->add_flag("--dry-run", dry, "print the resolved configuration and exit");
    fin->callback(
        [&] { rc = cmd_finetune(config, checkpoint, task_manifest, out, rand_init, dry); });

    auto* ev = app.add_subcommand("evaluate", "Nested stratified k-fold evaluation");
    ev->add_option("--config", config, "JSON run configuration")->required();
    ev->add_option("--checkpoint", checkpoint, "pretraining checkpoint (.ichk)");
    ev->add_option("--task-manifest", task_manifest, "labeled manifest (overrides the config)");
    ev->add_option("--out", out, "output directory")->required();
    ev->add_flag("--rand-init", rand_init, "use a randomly initialized frozen base");
    ev->add_flag("--dry-run", dry, "print the resolved configuration and exit");
    ev->callback(
        [&] { rc = cmd_evaluate(config, checkpoint, task_manifest, out, rand_init, dry); });

    double rho = 0.5;
    std::uint64_t seed = 42;
    auto* rec = app.add_subcommand("reconstruct", "Mask a volume and write the reconstruction");
    rec->add_option("--checkpoint", checkpoint, "pretraining checkpoint (.ichk)")->required();
    rec->add_option("--volume", volume, "input volume (.ivol, .nii, .nii.gz)")->required();
    rec->add_option("--rho", rho, "masking ratio")->capture_default_str();
    rec->add_option("--seed", seed, "mask sampling seed")->capture_default_str();
    rec->add_option("--out", out, "output directory")->required();
    rec->callback([&] { rc = cmd_reconstruct(checkpoint, volume, rho, seed, out); });

    std::string rhos = "0.25,0.5,0.75";
    auto* sw = app.add_subcommand("sweep", "Pretrain per masking ratio and evaluate each");
    sw->add_option("--config", config, "JSON run configuration")->required();
    sw->add_option("--rhos", rhos, "comma-separated masking ratios")->capture_default_str();
    sw->add_option("--task-manifest", task_manifest, "labeled manifest for the downstream task");
    sw->add_option("--out", out, "output directory")->required();
    sw->add_flag("--dry-run", dry, "print the resolved configuration and exit");
    sw->callback([&] { rc = cmd_sweep(config, rhos, task_manifest, out, dry); });

    int n = 0, grid = 48;
    double noise = 0.05;
    std::string kind = "class";
    auto* sy = app.add_subcommand("synth", "Generate a synthetic phantom dataset");
    sy->add_option("--n", n, "number of volumes")->required();
    sy->add_option("--kind", kind, "class | quality | pretrain")->capture_default_str();
    sy->add_option("--noise", noise, "noise sigma (quality: upper end of the ramp)")->capture_default_str();
    sy->add_option("--seed", seed, "generation seed")->capture_default_str();
    sy->add_option("--out-dir", out, "output directory")->required();
    sy->add_option("--grid", grid, "cubic volume edge length")->capture_default_str();
    sy->callback([&] { rc = cmd_synth(n, kind, noise, seed, out, grid); });

    try {
      app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
      const int code = app.exit(e);
      return code == 0 ? 0 : 2;
    }
    return rc;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.exit_code();
  } catch (const std::exception& e) {
    std::cerr << "internal error: " << e.what() << "\n";
    return 1;
  }
}

}  // namespace ichor
