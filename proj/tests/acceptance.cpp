// SPDX-License-Identifier: Apache-2.0
//
// Acceptance gate for the full pipeline. Each criterion is a self-contained
// check that prints exactly one "A<n> PASS" or "A<n> FAIL" line; failures add
// indented detail lines. Run with criterion names as arguments to execute a
// subset, or with no arguments for the whole gate. Exit code 0 means every
// executed criterion passed.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <functional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ichor/evaluate.hpp"
#include "ichor/finetune.hpp"
#include "ichor/optim.hpp"
#include "ichor/synth.hpp"
#include "ichor/train.hpp"
#include "test_util.hpp"

using namespace ichor;
using Notes = std::vector<std::string>;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

std::string fmt(const char* pattern, double a, double b = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b);
  return buf;
}

bool expect(bool cond, const std::string& what, Notes& notes) {
  if (!cond) notes.push_back(what);
  return cond;
}

bool bytes_equal(const void* a, const void* b, std::size_t n) {
  return std::memcmp(a, b, n) == 0;
}

template <class T>
bool mats_equal(const Mat<T>& a, const Mat<T>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         bytes_equal(a.data(), b.data(), sizeof(T) * static_cast<std::size_t>(a.size()));
}

/// The tiny end-to-end architecture: 24^3 volumes, P=12, d=24, 2+1 blocks.
RunConfig tiny_cfg() {
  RunConfig cfg;
  cfg.model = ModelConfig{24, 2, 2, 48, 12, 12, 1, 2, 24};
  cfg.pretrain.epochs = 3;
  cfg.pretrain.warmup_epochs = 1;
  cfg.pretrain.batch_size = 2;
  cfg.pretrain.base_lr = 1e-3;
  cfg.pretrain.seed = 7;
  cfg.finetune.epochs = 2;
  cfg.finetune.warmup_epochs = 1;
  cfg.finetune.batch_size = 4;
  cfg.finetune.base_lr = 1e-3;
  cfg.finetune.lora = LoraConfig{2, 4.0, 0.1};
  cfg.finetune.seed = 5;
  cfg.eval.k = 2;
  cfg.eval.seed = 11;
  return cfg;
}

SynthConfig synth_cfg(int n, PhantomKind kind, int edge, std::uint64_t seed) {
  SynthConfig sc;
  sc.n = n;
  sc.kind = kind;
  sc.grid = {edge, edge, edge};
  sc.seed = seed;
  return sc;
}

/// The convergence-benchmark architecture: 48^3 volumes, 4+2 blocks. The
/// embedding width is 72 rather than 64 so it divides into the three axis
/// groups of the sinusoidal position table and into the head count.
RunConfig bench_cfg() {
  RunConfig cfg;
  cfg.model = ModelConfig{72, 4, 6, 144, 12, 36, 2, 6, 72};
  cfg.pretrain.epochs = 25;  // 256 phantoms / batch 32 = 8 steps per epoch
  cfg.pretrain.warmup_epochs = 2;
  cfg.pretrain.batch_size = 32;
  cfg.pretrain.base_lr = 2e-3;
  cfg.pretrain.rho = 0.5;
  cfg.pretrain.seed = 42;
  cfg.finetune.epochs = 8;
  cfg.finetune.warmup_epochs = 1;
  cfg.finetune.batch_size = 8;
  cfg.finetune.base_lr = 1e-3;
  cfg.finetune.lora = LoraConfig{8, 16.0, 0.2};
  cfg.finetune.seed = 42;
  cfg.eval.k = 5;
  cfg.eval.seed = 42;
  return cfg;
}

ViTConfig vit_of(const ModelConfig& mc, const std::array<int, 3>& shape) {
  return ViTConfig{mc.embed_dim, mc.n_blocks,   mc.n_heads,
                   mc.mlp_dim,   mc.patch_size, PatchGrid::create(shape, mc.patch_size)};
}

DecoderConfig dec_of(const ModelConfig& mc) {
  return DecoderConfig{mc.dec_dim, mc.dec_blocks, mc.dec_heads, mc.dec_mlp_dim,
                       mc.patch_size * mc.patch_size * mc.patch_size};
}

// ---------------------------------------------------------------------------
// A1: patchify/unpatchify roundtrip, 100 random 96^3 volumes, bit-exact.
// ---------------------------------------------------------------------------
bool a1(Notes& notes) {
  constexpr double kLimitSeconds = 10.0;
  const auto t0 = std::chrono::steady_clock::now();
  bool ok = true;
  for (int trial = 0; trial < 100; ++trial) {
    const Volume v = ichor::test::random_volume({96, 96, 96}, 9000 + trial);
    auto [patches, grid] = patchify<float>(v, 12);
    ok &= expect(grid.n_patches == 512, "expected 512 patches", notes);
    const Volume back = unpatchify(patches, grid, v.voxel_size_mm, v.unit);
    ok &= expect(bytes_equal(v.data.data(), back.data.data(), sizeof(float) * v.data.size()),
                 "roundtrip not bit-exact in trial " + std::to_string(trial), notes);
    Rng mask_rng(mix64(17, static_cast<std::uint64_t>(trial)));
    const MaskPlan plan = sample_mask(grid.n_patches, 0.5, mask_rng);
    ok &= expect(plan.masked.size() == 256 && plan.visible.size() == 256,
                 "expected a 256/256 mask split", notes);
    if (!ok) break;
  }
  const double dt = seconds_since(t0);
  notes.push_back(fmt("runtime %.1fs (limit %.0fs)", dt, kLimitSeconds));
  return ok && expect(dt < kLimitSeconds, "runtime limit exceeded", notes);
}

// ---------------------------------------------------------------------------
// A2: perturbing only masked-patch voxels leaves latents and predictions
// bit-identical, 10 random trials.
// ---------------------------------------------------------------------------
bool a2(Notes& notes) {
  const ModelConfig mc{72, 4, 6, 144, 12, 36, 2, 6, 72};
  MaeModel<float> model = make_mae_model<float>(vit_of(mc, {96, 96, 96}), dec_of(mc));
  Rng init(21);
  init_mae_weights(model, init);
  const int P = mc.patch_size;

  bool ok = true;
  for (int trial = 0; trial < 10; ++trial) {
    const Volume v = ichor::test::random_volume({96, 96, 96}, 4000 + trial);
    MaeCache<float> clean;
    Rng m1(mix64(31, static_cast<std::uint64_t>(trial)));
    mae_forward_loss(v, 0.5, model, m1, clean);

    Volume w = v;
    Rng perturb(mix64(77, static_cast<std::uint64_t>(trial)));
    for (int pi : clean.plan.masked) {
      const auto c = model.vcfg.grid.coords_of(pi);
      for (int di = 0; di < P; ++di)
        for (int dj = 0; dj < P; ++dj)
          for (int dk = 0; dk < P; ++dk)
            w.at(c[0] * P + di, c[1] * P + dj, c[2] * P + dk) =
                static_cast<float>(perturb.uniform());
    }

    MaeCache<float> dirty;
    Rng m2(mix64(31, static_cast<std::uint64_t>(trial)));
    mae_forward_loss(w, 0.5, model, m2, dirty);
    ok &= expect(dirty.plan.masked == clean.plan.masked, "mask resampling diverged", notes);
    ok &= expect(mats_equal(clean.zv.values, dirty.zv.values),
                 "encoder latents changed in trial " + std::to_string(trial), notes);
    ok &= expect(mats_equal(clean.pred, dirty.pred),
                 "predictions changed in trial " + std::to_string(trial), notes);
    if (!ok) break;
  }
  return ok;
}

// ---------------------------------------------------------------------------
// A3: end-to-end 64-bit gradient check at the tiny configuration.
// ---------------------------------------------------------------------------
bool a3(Notes& notes) {
  constexpr double kGradTol = 1e-5;
  constexpr double kLimitSeconds = 120.0;
  const auto t0 = std::chrono::steady_clock::now();

  const ModelConfig mc{24, 2, 2, 48, 12, 12, 1, 2, 24};
  MaeModel<double> model = make_mae_model<double>(vit_of(mc, {24, 24, 24}), dec_of(mc));
  Rng init(3);
  init_mae_weights(model, init);
  const Volume v = ichor::test::random_volume({24, 24, 24}, 8);

  auto params = collect_params(model);
  MaeGrads<double> grads = MaeGrads<double>::zeros_like(model);
  auto grad_refs = grads.params();

  const auto loss = [&]() -> double {
    MaeCache<double> cache;
    Rng mask_rng(91);
    return mae_forward_loss(v, 0.5, model, mask_rng, cache);
  };
  {
    MaeCache<double> cache;
    Rng mask_rng(91);
    mae_forward_loss(v, 0.5, model, mask_rng, cache);
    mae_backward(cache, model, grads);
  }
  const double worst = ichor::test::fd_check<double>(params, grad_refs, loss, 1e-5);
  const double dt = seconds_since(t0);
  notes.push_back(fmt("worst tensor relative error %.3g (tolerance 1e-5)", worst));
  notes.push_back(fmt("runtime %.1fs (limit %.0fs)", dt, kLimitSeconds));
  bool ok = expect(worst < kGradTol, "gradient mismatch beyond tolerance", notes);
  return ok && expect(dt < kLimitSeconds, "runtime limit exceeded", notes);
}

// ---------------------------------------------------------------------------
// A4: LoRA identity at zero up-projection, merged-vs-unmerged agreement, and
// frozen-base immutability under fine-tuning.
// ---------------------------------------------------------------------------
bool a4(Notes& notes) {
  constexpr double kMergeTol = 1e-6;
  bool ok = true;
  const ModelConfig mc{24, 2, 2, 48, 12, 12, 1, 2, 24};

  {
    MaeModel<float> model = make_mae_model<float>(vit_of(mc, {24, 24, 24}), dec_of(mc));
    Rng init(41);
    init_mae_weights(model, init);
    auto ads = make_adapters<float>(model.vcfg, LoraConfig{8, 16.0, 0.2});
    Rng arng(42);
    init_adapters(ads, arng);
    const Volume v = ichor::test::random_volume({24, 24, 24}, 43);
    const Mat<float> with = encode_full<float>(v, model, &ads, false, nullptr, nullptr);
    const Mat<float> without = encode_full<float>(v, model, nullptr, false, nullptr, nullptr);
    ok &= expect(mats_equal(with, without), "zero-up adapters are not an exact identity", notes);
  }

  {
    MaeModel<double> model = make_mae_model<double>(vit_of(mc, {24, 24, 24}), dec_of(mc));
    Rng init(44);
    init_mae_weights(model, init);
    auto ads = make_adapters<double>(model.vcfg, LoraConfig{4, 16.0, 0.0});
    Rng arng(45);
    for (auto& b : ads)
      for (LoraPair<double>* p : {&b.attn.q, &b.attn.k, &b.attn.v, &b.attn.o}) {
        ichor::test::random_fill(p->down, arng, 0.1);
        ichor::test::random_fill(p->up, arng, 0.1);
      }
    MaeModel<double> merged = model;
    merged.enc = merge_adapters(model.enc, ads);
    double worst = 0.0;
    for (int trial = 0; trial < 20; ++trial) {
      const Volume v = ichor::test::random_volume({24, 24, 24}, 4600 + trial);
      const Mat<double> za = encode_full<double>(v, model, &ads, false, nullptr, nullptr);
      const Mat<double> zm = encode_full<double>(v, merged, nullptr, false, nullptr, nullptr);
      worst = std::max(worst, (za - zm).norm() / std::max(zm.norm(), 1e-12));
    }
    notes.push_back(fmt("merged vs unmerged worst relative error %.3g (tolerance 1e-6)", worst));
    ok &= expect(worst < kMergeTol, "merge disagreement beyond tolerance", notes);
  }

  {
    RunConfig cfg = tiny_cfg();
    const Dataset data = make_synth_dataset(synth_cfg(16, PhantomKind::lesion, 24, 47));
    MaeModel<float> base = build_random_base(cfg, data.shape, 48);
    std::vector<ParamRef<float>> refs;
    visit_params(base.enc, "enc", [&refs](std::string name, Mat<float>& t) {
      refs.push_back(ParamRef<float>{std::move(name), &t});
    });
    const std::string before = hash_params(refs);
    const auto dir = ichor::test::temp_dir("acc_a4");
    std::vector<int> train_idx, val_idx;
    for (int i = 0; i < 12; ++i) train_idx.push_back(i);
    for (int i = 12; i < 16; ++i) val_idx.push_back(i);
    run_finetune(cfg, data, train_idx, val_idx, ManifestPurpose::classification, base, dir);
    ok &= expect(hash_params(refs) == before, "base hash changed during fine-tuning", notes);
    std::filesystem::remove_all(dir);
  }
  return ok;
}

// ---------------------------------------------------------------------------
// A5: metric oracles.
// ---------------------------------------------------------------------------
double auc_oracle(const std::vector<double>& scores, const std::vector<int>& labels) {
  double num = 0.0;
  long np = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] != 1) continue;
    ++np;
    for (std::size_t j = 0; j < scores.size(); ++j) {
      if (labels[j] != 0) continue;
      if (scores[i] > scores[j]) num += 1.0;
      else if (scores[i] == scores[j]) num += 0.5;
    }
  }
  const long nn = static_cast<long>(scores.size()) - np;
  return num / (static_cast<double>(np) * static_cast<double>(nn));
}

bool a5(Notes& notes) {
  constexpr double kRegTol = 1e-10;
  constexpr double kBceTol = 1e-12;
  bool ok = true;

  Rng rng(1001);
  for (int trial = 0; trial < 200 && ok; ++trial) {
    const int n = 2 + static_cast<int>(rng.below(39));
    std::vector<double> scores(n);
    std::vector<int> labels(n);
    for (int i = 0; i < n; ++i) scores[i] = static_cast<double>(rng.below(8)) / 7.0;
    int np = 0;
    for (int i = 0; i < n; ++i) {
      labels[i] = static_cast<int>(rng.below(2));
      np += labels[i];
    }
    if (np == 0) labels[0] = 1;
    if (np == n) labels[0] = 0;
    ok &= expect(auc_score(scores, labels) == auc_oracle(scores, labels),
                 "AUC diverged from the pairwise oracle in instance " + std::to_string(trial),
                 notes);
  }

  ok &= expect(auc_score({0.1, 0.4, 0.35, 0.8}, {0, 0, 1, 1}) == 0.75,
               "worked AUC example did not give 0.75", notes);

  Rng reg_rng(1002);
  for (int trial = 0; trial < 50 && ok; ++trial) {
    const int n = 5 + static_cast<int>(reg_rng.below(40));
    std::vector<double> preds(n), targets(n);
    for (int i = 0; i < n; ++i) {
      preds[i] = reg_rng.uniform();
      targets[i] = reg_rng.uniform();
    }
    double se = 0, ae = 0, mt = 0;
    for (int i = 0; i < n; ++i) mt += targets[i] / n;
    double ss_tot = 0, mp = 0;
    for (int i = 0; i < n; ++i) {
      se += (preds[i] - targets[i]) * (preds[i] - targets[i]);
      ae += std::abs(preds[i] - targets[i]);
      ss_tot += (targets[i] - mt) * (targets[i] - mt);
      mp += preds[i] / n;
    }
    double cov = 0, vp = 0;
    for (int i = 0; i < n; ++i) {
      cov += (preds[i] - mp) * (targets[i] - mt);
      vp += (preds[i] - mp) * (preds[i] - mp);
    }
    const RegressionMetrics m = regression_metrics(preds, targets);
    ok &= expect(ichor::test::rel_err(m.mse, se / n, 1.0) < kRegTol, "MSE oracle mismatch", notes);
    ok &= expect(ichor::test::rel_err(m.rmse, std::sqrt(se / n), 1.0) < kRegTol,
                 "RMSE oracle mismatch", notes);
    ok &= expect(ichor::test::rel_err(m.mae, ae / n, 1.0) < kRegTol, "MAE oracle mismatch", notes);
    ok &= expect(ichor::test::rel_err(m.r2, 1.0 - se / ss_tot, 1.0) < kRegTol,
                 "R^2 oracle mismatch", notes);
    ok &= expect(ichor::test::rel_err(m.pearson, cov / std::sqrt(vp * ss_tot), 1.0) < kRegTol,
                 "Pearson oracle mismatch", notes);
  }

  const double ln2 = std::log(2.0);
  ok &= expect(std::abs(weighted_bce(0.0, 1, 1.0, 1.0, static_cast<double*>(nullptr)) - ln2) <
                   kBceTol,
               "BCE at zero logit, label 1, is not ln 2", notes);
  ok &= expect(std::abs(weighted_bce(0.0, 0, 1.0, 1.0, static_cast<double*>(nullptr)) - ln2) <
                   kBceTol,
               "BCE at zero logit, label 0, is not ln 2", notes);
  return ok;
}

// ---------------------------------------------------------------------------
// A6: nested CV integrity on 147 samples with 103/44 labels.
// ---------------------------------------------------------------------------
bool a6(Notes& notes) {
  bool ok = true;
  RunConfig cfg = tiny_cfg();
  cfg.finetune.epochs = 1;
  cfg.eval.k = 5;
  cfg.eval.seed = 42;

  Dataset data = make_synth_dataset(synth_cfg(147, PhantomKind::pretrain, 24, 61));
  for (int i = 0; i < 147; ++i) data.entries[static_cast<std::size_t>(i)].label = i < 44 ? 1 : 0;

  const MaeModel<float> base = build_random_base(cfg, data.shape, 62);
  const auto dir = ichor::test::temp_dir("acc_a6");
  const CVReport report = run_nested_cv(cfg, data, base, dir);
  ok &= expect(report.cls_folds.size() == 5, "expected 5 fold reports", notes);

  std::ifstream audit(dir / "folds.jsonl");
  ok &= expect(audit.good(), "missing folds.jsonl audit log", notes);
  std::vector<std::vector<int>> tests;
  std::string line;
  while (std::getline(audit, line)) {
    if (line.empty()) continue;
    const auto row = nlohmann::json::parse(line);
    const auto test = row.at("test").get<std::vector<int>>();
    const auto train = row.at("inner_train").get<std::vector<int>>();
    const auto val = row.at("inner_val").get<std::vector<int>>();
    const std::set<int> test_set(test.begin(), test.end());
    for (int i : train)
      ok &= expect(test_set.count(i) == 0, "inner train leaks into the test fold", notes);
    for (int i : val)
      ok &= expect(test_set.count(i) == 0, "inner val leaks into the test fold", notes);
    ok &= expect(test.size() + train.size() + val.size() == 147, "fold rows do not cover 147",
                 notes);
    long pos = 0;
    for (int i : test) pos += *data.entries[static_cast<std::size_t>(i)].label;
    ok &= expect(test.size() == 29 || test.size() == 30,
                 "fold size " + std::to_string(test.size()) + " outside 29-30", notes);
    ok &= expect(pos == 8 || pos == 9, "fold positives " + std::to_string(pos) + " outside 8-9",
                 notes);
    tests.push_back(test);
  }
  ok &= expect(tests.size() == 5, "expected 5 audit rows", notes);

  std::vector<int> all;
  for (std::size_t a = 0; a < tests.size(); ++a) {
    for (std::size_t b = a + 1; b < tests.size(); ++b) {
      const std::set<int> sa(tests[a].begin(), tests[a].end());
      for (int i : tests[b])
        ok &= expect(sa.count(i) == 0, "outer test folds overlap", notes);
    }
    all.insert(all.end(), tests[a].begin(), tests[a].end());
  }
  std::sort(all.begin(), all.end());
  std::vector<int> want(147);
  std::iota(want.begin(), want.end(), 0);
  ok &= expect(all == want, "outer test folds do not partition the dataset", notes);
  std::filesystem::remove_all(dir);
  return ok;
}

// ---------------------------------------------------------------------------
// A7: pretraining convergence on 256 phantoms over 200 steps.
// ---------------------------------------------------------------------------
bool a7(Notes& notes) {
  constexpr double kLimitSeconds = 600.0;
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = bench_cfg();
  const Dataset data = make_synth_dataset(synth_cfg(256, PhantomKind::pretrain, 48, 42));
  const auto dir = ichor::test::temp_dir("acc_a7");
  const PretrainResult res = run_pretraining(cfg, data, dir);
  std::filesystem::remove_all(dir);

  bool ok = expect(res.step_losses.size() == 200,
                   "expected exactly 200 steps, got " + std::to_string(res.step_losses.size()),
                   notes);
  if (!ok) return false;
  double first = 0.0, last = 0.0;
  for (int i = 0; i < 10; ++i) {
    first += res.step_losses[static_cast<std::size_t>(i)] / 10.0;
    last += res.step_losses[static_cast<std::size_t>(190 + i)] / 10.0;
  }
  const double dt = seconds_since(t0);
  notes.push_back(fmt("first-10 mean %.5f, final-10 mean %.5f", first, last));
  notes.push_back(fmt("ratio %.3f (required <= 0.5), runtime %.0fs", last / first, dt));
  ok &= expect(last <= 0.5 * first, "final-10 mean above half the first-10 mean", notes);
  return ok && expect(dt < kLimitSeconds, "runtime limit exceeded", notes);
}

// ---------------------------------------------------------------------------
// A8: pretraining followed by nested 5-fold LoRA fine-tuning on 120 labeled
// phantoms reaches mean test AUC >= 0.9.
// ---------------------------------------------------------------------------
bool a8(Notes& notes) {
  constexpr double kLimitSeconds = 1200.0;
  constexpr double kAucFloor = 0.9;
  const auto t0 = std::chrono::steady_clock::now();
  const RunConfig cfg = bench_cfg();

  const auto dir = ichor::test::temp_dir("acc_a8");
  const Dataset pre_data = make_synth_dataset(synth_cfg(256, PhantomKind::pretrain, 48, 42));
  const PretrainResult pre = run_pretraining(cfg, pre_data, dir / "pretrain");
  const MaeModel<float> base = load_pretrained(pre.checkpoint_path);

  const Dataset task = make_synth_dataset(synth_cfg(120, PhantomKind::lesion, 48, 123));
  const CVReport report = run_nested_cv(cfg, task, base, dir / "eval");
  std::filesystem::remove_all(dir);

  bool ok = expect(report.cls_folds.size() == 5, "expected 5 fold reports", notes);
  std::string aucs = "fold AUCs:";
  for (const auto& m : report.cls_folds) aucs += fmt(" %.3f", m.auc);
  notes.push_back(aucs);
  const double dt = seconds_since(t0);
  notes.push_back(fmt("mean test AUC %.4f (required >= 0.9), runtime %.0fs", report.cls_mean.auc,
                      dt));
  ok &= expect(report.cls_mean.auc >= kAucFloor, "mean test AUC below 0.9", notes);
  return ok && expect(dt < kLimitSeconds, "runtime limit exceeded", notes);
}

// ---------------------------------------------------------------------------
// A9: determinism and persistence.
// ---------------------------------------------------------------------------
bool a9(Notes& notes) {
  bool ok = true;
  const RunConfig cfg = tiny_cfg();
  const Dataset data = make_synth_dataset(synth_cfg(6, PhantomKind::pretrain, 24, 71));

  const auto dir1 = ichor::test::temp_dir("acc_a9_run1");
  const auto dir2 = ichor::test::temp_dir("acc_a9_run2");
  const PretrainResult r1 = run_pretraining(cfg, data, dir1);
  const PretrainResult r2 = run_pretraining(cfg, data, dir2);
  ok &= expect(ichor::test::read_bytes(r1.checkpoint_path) ==
                   ichor::test::read_bytes(r2.checkpoint_path),
               "pretraining checkpoints differ between identical runs", notes);
  ok &= expect(ichor::test::read_bytes(dir1 / "train_log.jsonl") ==
                   ichor::test::read_bytes(dir2 / "train_log.jsonl"),
               "training logs differ between identical runs", notes);

  MaeModel<float> m1 = load_pretrained(r1.checkpoint_path);
  MaeModel<float> m2 = load_pretrained(r2.checkpoint_path);
  MaeCache<float> c1, c2;
  Rng s1(5005), s2(5005);
  const float l1 = mae_forward_loss(data.volumes[0], 0.5, m1, s1, c1);
  const float l2 = mae_forward_loss(data.volumes[0], 0.5, m2, s2, c2);
  ok &= expect(l1 == l2 && mats_equal(c1.pred, c2.pred),
               "save-load-forward is not bit-identical", notes);

  RunConfig ecfg = cfg;
  ecfg.finetune.epochs = 1;
  const Dataset task = make_synth_dataset(synth_cfg(12, PhantomKind::lesion, 24, 72));
  const MaeModel<float> base = build_random_base(ecfg, task.shape, 73);
  const auto ev1 = ichor::test::temp_dir("acc_a9_eval1");
  const auto ev2 = ichor::test::temp_dir("acc_a9_eval2");
  run_nested_cv(ecfg, task, base, ev1);
  run_nested_cv(ecfg, task, base, ev2);
  for (const char* name : {"report.json", "folds.jsonl"})
    ok &= expect(ichor::test::read_bytes(ev1 / name) == ichor::test::read_bytes(ev2 / name),
                 std::string(name) + " differs between identical runs", notes);
  ok &= expect(ichor::test::read_bytes(ev1 / "fold0" / "adapter.ichk") ==
                   ichor::test::read_bytes(ev2 / "fold0" / "adapter.ichk"),
               "adapter checkpoints differ between identical runs", notes);
  for (const auto& d : {dir1, dir2, ev1, ev2}) std::filesystem::remove_all(d);
  return ok;
}

// ---------------------------------------------------------------------------
// A10: schedule, optimizer, and configuration defaults.
// ---------------------------------------------------------------------------
bool a10(Notes& notes) {
  constexpr double kStepTol = 1e-12;
  bool ok = true;

  ok &= expect(lr_at(399, 1.5e-4, 40, 400, 10) == 1.5e-4,
               "learning rate at the end of warmup is not exactly the base rate", notes);

  {
    Mat<double> theta(1, 1), grad(1, 1);
    theta(0, 0) = 0.0;
    grad(0, 0) = 1.0;
    std::vector<ParamRef<double>> p{{"t", &theta}}, g{{"t", &grad}};
    AdamWConfig acfg;
    acfg.weight_decay = 0.0;
    AdamW<double> opt(acfg);
    opt.init(p);
    opt.step(p, g, 1e-3);
    ok &= expect(std::abs(theta(0, 0) + 1e-3 / (1.0 + 1e-8)) < kStepTol,
                 "AdamW first-step example mismatch", notes);
  }
  {
    Mat<double> theta(1, 1), grad(1, 1);
    theta(0, 0) = 1.0;
    grad(0, 0) = 0.0;
    std::vector<ParamRef<double>> p{{"t", &theta}}, g{{"t", &grad}};
    AdamWConfig acfg;
    acfg.weight_decay = 0.05;
    AdamW<double> opt(acfg);
    opt.init(p);
    opt.step(p, g, 0.1);
    ok &= expect(std::abs(theta(0, 0) - 0.995) < kStepTol,
                 "decoupled weight-decay example mismatch", notes);
  }

  const RunConfig d;
  ok &= expect(d.pretrain.rho == 0.5, "default rho", notes);
  ok &= expect(d.pretrain.epochs == 400 && d.pretrain.warmup_epochs == 40,
               "default pretraining epochs", notes);
  ok &= expect(d.pretrain.base_lr == 1.5e-4, "default pretraining learning rate", notes);
  ok &= expect(d.pretrain.batch_size == 48, "default pretraining batch size", notes);
  ok &= expect(d.pretrain.weight_decay == 0.05, "default weight decay", notes);
  ok &= expect(d.pretrain.alpha_bal == 0.5, "default study-balance exponent", notes);
  ok &= expect(d.finetune.epochs == 100 && d.finetune.warmup_epochs == 10,
               "default fine-tuning epochs", notes);
  ok &= expect(d.finetune.base_lr == 5e-4, "default fine-tuning learning rate", notes);
  ok &= expect(d.finetune.batch_size == 8, "default fine-tuning batch size", notes);
  ok &= expect(d.finetune.weight_decay == 0.05, "default fine-tuning weight decay", notes);
  ok &= expect(d.finetune.lora.r == 8 && d.finetune.lora.alpha == 16.0 &&
                   d.finetune.lora.dropout == 0.2,
               "default adapter settings", notes);
  ok &= expect(d.eval.k == 5, "default fold count", notes);
  ok &= expect(d.model.embed_dim == 768 && d.model.n_blocks == 12 && d.model.n_heads == 12 &&
                   d.model.mlp_dim == 3072 && d.model.patch_size == 12,
               "default encoder architecture", notes);
  ok &= expect(d.model.dec_dim == 384 && d.model.dec_blocks == 4 && d.model.dec_heads == 12 &&
                   d.model.dec_mlp_dim == 1536,
               "default decoder architecture", notes);
  return ok;
}

// ---------------------------------------------------------------------------
// A11: the sweep command pretrains per masking ratio and reports per-ratio
// downstream means.
// ---------------------------------------------------------------------------
bool a11(Notes& notes) {
  bool ok = true;
  const auto dir = ichor::test::temp_dir("acc_a11");

  RunConfig cfg = tiny_cfg();
  cfg.pretrain.epochs = 2;
  cfg.pretrain.warmup_epochs = 1;
  cfg.pretrain.batch_size = 4;
  cfg.finetune.epochs = 2;
  const auto pre_manifest =
      write_synth_dataset(synth_cfg(16, PhantomKind::pretrain, 24, 81), dir / "pre");
  const auto task_manifest =
      write_synth_dataset(synth_cfg(24, PhantomKind::lesion, 24, 82), dir / "task");
  cfg.data.manifest_path = pre_manifest.string();

  const auto cfg_path = dir / "config.json";
  {
    std::ofstream out(cfg_path);
    out << cfg.to_json().dump(2) << "\n";
  }

  const std::string cmd = std::string(ICHOR_BIN) + " sweep --config " + cfg_path.string() +
                          " --rhos 0.25,0.5,0.75 --task-manifest " + task_manifest.string() +
                          " --out " + (dir / "sweep").string() + " > " +
                          (dir / "sweep_stdout.txt").string() + " 2>&1";
  const int rc = std::system(cmd.c_str());
  ok &= expect(rc == 0, "sweep command exited with status " + std::to_string(rc), notes);
  if (!ok) {
    std::filesystem::remove_all(dir);
    return false;
  }

  std::ifstream in(dir / "sweep" / "sweep.json");
  ok &= expect(in.good(), "missing sweep.json", notes);
  const auto doc = nlohmann::json::parse(in);
  const std::vector<double> want_rhos{0.25, 0.5, 0.75};
  ok &= expect(doc.at("rhos").get<std::vector<double>>() == want_rhos, "rho list mismatch",
               notes);
  const auto& rows = doc.at("rows");
  ok &= expect(rows.size() == 3, "expected one row per rho", notes);
  std::string means = "per-rho mean AUC:";
  for (std::size_t r = 0; r < rows.size(); ++r) {
    ok &= expect(rows[r].at("rho").get<double>() == want_rhos[r], "row rho mismatch", notes);
    ok &= expect(rows[r].at("task").get<std::string>() == "classification",
                 "row task mismatch", notes);
    ok &= expect(rows[r].at("pretrain_steps").get<int>() == 8, "row step count mismatch", notes);
    const double auc = rows[r].at("mean").at("auc").get<double>();
    const double f1 = rows[r].at("mean").at("f1").get<double>();
    means += fmt(" %.3f", auc);
    ok &= expect(auc >= 0.0 && auc <= 1.0, "mean AUC outside [0,1]", notes);
    ok &= expect(f1 >= 0.0 && f1 <= 1.0, "mean F1 outside [0,1]", notes);
    char name[24];
    std::snprintf(name, sizeof name, "rho_%.2f", want_rhos[r]);
    ok &= expect(std::filesystem::exists(dir / "sweep" / name / "checkpoint.ichk"),
                 "missing per-rho checkpoint", notes);
    ok &= expect(std::filesystem::exists(dir / "sweep" / name / "eval" / "report.json"),
                 "missing per-rho report", notes);
  }
  notes.push_back(means);

  std::ifstream txt(dir / "sweep" / "sweep.txt");
  const std::string table((std::istreambuf_iterator<char>(txt)),
                          std::istreambuf_iterator<char>());
  ok &= expect(table.find("rho") != std::string::npos, "table header missing", notes);
  ok &= expect(table.find("AUC") != std::string::npos, "table metric columns missing", notes);
  ok &= expect(table.find("(Unit: %)") != std::string::npos, "table unit footer missing", notes);
  std::filesystem::remove_all(dir);
  return ok;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<bool(Notes&)>>> criteria = {
      {"A1", a1}, {"A2", a2}, {"A3", a3}, {"A4", a4},  {"A5", a5},  {"A6", a6},
      {"A7", a7}, {"A8", a8}, {"A9", a9}, {"A10", a10}, {"A11", a11},
  };

  std::set<std::string> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(argv[i]);
  for (const auto& w : wanted) {
    bool known = false;
    for (const auto& [name, fn] : criteria) known |= name == w;
    if (!known) {
      std::fprintf(stderr, "unknown criterion '%s'\n", w.c_str());
      return 2;
    }
  }

  int failures = 0;
  for (const auto& [name, fn] : criteria) {
    if (!wanted.empty() && wanted.count(name) == 0) continue;
    Notes notes;
    bool ok = false;
    try {
      ok = fn(notes);
    } catch (const std::exception& e) {
      notes.push_back(std::string("exception: ") + e.what());
    }
    std::printf("%s %s\n", name.c_str(), ok ? "PASS" : "FAIL");
    for (const auto& n : notes) std::printf("    %s\n", n.c_str());
    std::fflush(stdout);
    failures += ok ? 0 : 1;
  }
  return failures == 0 ? 0 : 1;
}
