// SPDX-License-Identifier: Apache-2.0

#include "ichor/train.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "ichor/optim.hpp"

namespace ichor {

std::map<std::string, double> per_study_weight(const std::map<std::string, long>& study_sizes,
                                               double alpha_bal) {
  if (study_sizes.empty()) throw DataError("sampling weights need a non-empty manifest");
  if (!(alpha_bal >= 0.0 && alpha_bal <= 1.0))
    throw ConfigError("alpha_bal must lie in [0,1]");
  std::map<std::string, double> w;
  for (const auto& [study, count] : study_sizes) {
    if (count < 1) throw DataError("study '" + study + "' has a non-positive scan count");
    w[study] = std::pow(static_cast<double>(count), -alpha_bal);
  }
  return w;
}

std::vector<double> sampling_weights(const std::vector<ManifestEntry>& entries,
                                     double alpha_bal) {
  if (entries.empty()) throw DataError("sampling weights need a non-empty manifest");
  std::map<std::string, long> sizes;
  for (const auto& e : entries) ++sizes[e.study_id];
  const auto w = per_study_weight(sizes, alpha_bal);
  std::vector<double> out;
  out.reserve(entries.size());
  for (const auto& e : entries) out.push_back(w.at(e.study_id));
  return out;
}

WeightedSampler::WeightedSampler(const std::vector<double>& weights) {
  if (weights.empty()) throw DataError("sampler needs at least one weight");
  cum_.reserve(weights.size());
  double total = 0.0;
  for (double w : weights) {
    if (!(w > 0.0)) throw DataError("sampling weights must be positive");
    total += w;
    cum_.push_back(total);
  }
}

int WeightedSampler::draw(Rng& rng) const {
  const double u = rng.uniform() * cum_.back();
  const auto it = std::upper_bound(cum_.begin(), cum_.end(), u);
  const auto idx = std::min<std::ptrdiff_t>(it - cum_.begin(),
                                            static_cast<std::ptrdiff_t>(cum_.size()) - 1);
  return static_cast<int>(idx);
}

nlohmann::json model_meta(const ModelConfig& mc, const std::array<int, 3>& volume_shape) {
  return {{"embed_dim", mc.embed_dim},
          {"n_blocks", mc.n_blocks},
          {"n_heads", mc.n_heads},
          {"mlp_dim", mc.mlp_dim},
          {"patch_size", mc.patch_size},
          {"dec_dim", mc.dec_dim},
          {"dec_blocks", mc.dec_blocks},
          {"dec_heads", mc.dec_heads},
          {"dec_mlp_dim", mc.dec_mlp_dim},
          {"volume_shape", {volume_shape[0], volume_shape[1], volume_shape[2]}}};
}

std::pair<ViTConfig, DecoderConfig> model_from_meta(const nlohmann::json& meta) {
  ViTConfig v;
  DecoderConfig d;
  try {
    v.embed_dim = meta.at("embed_dim").get<int>();
    v.n_blocks = meta.at("n_blocks").get<int>();
    v.n_heads = meta.at("n_heads").get<int>();
    v.mlp_dim = meta.at("mlp_dim").get<int>();
    v.patch_size = meta.at("patch_size").get<int>();
    d.dec_dim = meta.at("dec_dim").get<int>();
    d.n_blocks = meta.at("dec_blocks").get<int>();
    d.n_heads = meta.at("dec_heads").get<int>();
    d.mlp_dim = meta.at("dec_mlp_dim").get<int>();
    const auto& shape = meta.at("volume_shape");
    if (shape.size() != 3) throw HeaderError("volume_shape must have 3 entries");
    v.grid = PatchGrid::create({shape[0].get<int>(), shape[1].get<int>(), shape[2].get<int>()},
                               v.patch_size);
  } catch (const nlohmann::json::exception& e) {
    throw HeaderError(std::string("malformed model description: ") + e.what());
  }
  d.out_dim = v.patch_size * v.patch_size * v.patch_size;
  v.validate();
  d.validate();
  return {v, d};
}

namespace {

nlohmann::json optimizer_meta(const AdamWConfig& a, double base_lr) {
  return {{"beta1", a.beta1},
          {"beta2", a.beta2},
          {"eps", a.eps},
          {"weight_decay", a.weight_decay},
          {"base_lr", base_lr}};
}

}  // namespace

PretrainResult run_pretraining(const RunConfig& cfg, const Dataset& data,
                               const std::filesystem::path& out_dir) {
  validate_manifest(data.entries, ManifestPurpose::pretrain);
  std::filesystem::create_directories(out_dir);

  const PatchGrid grid = PatchGrid::create(data.shape, cfg.model.patch_size);
  ViTConfig vcfg{cfg.model.embed_dim, cfg.model.n_blocks,  cfg.model.n_heads,
                 cfg.model.mlp_dim,   cfg.model.patch_size, grid};
  DecoderConfig dcfg{cfg.model.dec_dim, cfg.model.dec_blocks, cfg.model.dec_heads,
                     cfg.model.dec_mlp_dim, grid.voxels_per_patch()};
  MaeModel<float> model = make_mae_model<float>(vcfg, dcfg);

  Rng root(cfg.pretrain.seed);
  Rng init_rng = root.substream(0x696e6974ULL);
  init_mae_weights(model, init_rng);

  auto params = collect_params(model);
  AdamWConfig acfg;
  acfg.weight_decay = cfg.pretrain.weight_decay;
  AdamW<float> opt(acfg);
  opt.init(params);

  WeightedSampler sampler(sampling_weights(data.entries, cfg.pretrain.alpha_bal));
  Rng sample_rng = root.substream(0x73616d70ULL);
  const std::uint64_t mask_root = mix64(cfg.pretrain.seed, 0x6d61736bULL);

  const long n = static_cast<long>(data.volumes.size());
  const long bs = cfg.pretrain.batch_size;
  const std::int64_t steps_per_epoch = (n + bs - 1) / bs;

  std::ofstream log(out_dir / "train_log.jsonl");
  if (!log) throw DataError("cannot open training log in '" + out_dir.string() + "'");

  auto save = [&](const std::filesystem::path& path, std::int64_t step) {
    nlohmann::json meta = {{"stage", "pretrain"},
                           {"model", model_meta(cfg.model, data.shape)},
                           {"optimizer", optimizer_meta(acfg, cfg.pretrain.base_lr)},
                           {"step", step},
                           {"rng", sample_rng.state()}};
    save_checkpoint<float>(path, std::move(meta), params);
  };

  PretrainResult result;
  MaeGrads<float> grads = MaeGrads<float>::zeros_like(model);
  auto grad_params = grads.params();
  MaeCache<float> cache;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < cfg.pretrain.epochs; ++epoch) {
    double epoch_sum = 0.0;
    double lr = 0.0;
    for (std::int64_t t = 0; t < steps_per_epoch; ++t, ++step) {
      grads.zero();
      double batch_loss = 0.0;
      for (long slot = 0; slot < bs; ++slot) {
        const int idx = sampler.draw(sample_rng);
        Rng mask_rng(mix64(mask_root, static_cast<std::uint64_t>(step),
                           static_cast<std::uint64_t>(slot)));
        const float loss =
            mae_forward_loss(data.volumes[idx], cfg.pretrain.rho, model, mask_rng, cache);
        if (!std::isfinite(loss))
          throw NumericError("non-finite loss at step " + std::to_string(step));
        batch_loss += loss;
        mae_backward(cache, model, grads);
      }
      batch_loss /= static_cast<double>(bs);
      const float inv_bs = 1.f / static_cast<float>(bs);
      for (auto& g : grad_params) *g.tensor *= inv_bs;
      if (cfg.pretrain.grad_clip > 0.0) clip_grad_norm(grad_params, cfg.pretrain.grad_clip);
      lr = lr_at(step, cfg.pretrain.base_lr, cfg.pretrain.warmup_epochs, cfg.pretrain.epochs,
                 steps_per_epoch);
      opt.step(params, grad_params, lr);
      result.step_losses.push_back(batch_loss);
      epoch_sum += batch_loss;
    }
    const double epoch_loss = epoch_sum / static_cast<double>(steps_per_epoch);
    result.epoch_losses.push_back(epoch_loss);
    log << nlohmann::json{{"epoch", epoch}, {"step", step - 1}, {"lr", lr}, {"loss", epoch_loss}}
               .dump()
        << "\n";
    log.flush();
    if (cfg.pretrain.checkpoint_every > 0 && (epoch + 1) % cfg.pretrain.checkpoint_every == 0 &&
        epoch + 1 < cfg.pretrain.epochs) {
      char name[48];
      std::snprintf(name, sizeof name, "checkpoint_epoch%04d.ichk", epoch + 1);
      save(out_dir / name, step);
    }
  }
  result.checkpoint_path = out_dir / "checkpoint.ichk";
  save(result.checkpoint_path, step);
  return result;
}

PretrainResult run_pretraining(const RunConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.data.manifest_path.empty())
    throw ConfigError("data.manifest_path is required for pretraining");
  const auto entries = load_manifest(cfg.data.manifest_path);
  const Dataset data = load_dataset(entries, cfg.data.format, cfg.model.patch_size);
  return run_pretraining(cfg, data, out_dir);
}

MaeModel<float> load_pretrained(const std::filesystem::path& path) {
  const CheckpointFile file = load_checkpoint(path);
  if (!file.meta.contains("stage") || file.meta["stage"].get<std::string>() != "pretrain")
    throw HeaderError("'" + path.string() + "' is not a pretraining checkpoint");
  if (!file.meta.contains("model")) throw HeaderError("checkpoint has no model description");
  auto [vcfg, dcfg] = model_from_meta(file.meta["model"]);
  MaeModel<float> model = make_mae_model<float>(vcfg, dcfg);
  auto params = collect_params(model);
  assign_params(file, params);
  return model;
}

}  // namespace ichor
