// SPDX-License-Identifier: Apache-2.0

#include "ichor/finetune.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <utility>

#include "ichor/checkpoint.hpp"
#include "ichor/metrics.hpp"
#include "ichor/optim.hpp"
#include "ichor/train.hpp"

namespace ichor {

std::pair<double, double> class_weights(const std::vector<int>& labels) {
  long n_pos = 0, n_neg = 0;
  for (int y : labels) {
    if (y == 1)
      ++n_pos;
    else if (y == 0)
      ++n_neg;
    else
      throw DataError("class weights need 0/1 labels");
  }
  if (n_pos == 0 || n_neg == 0)
    throw DataError("class weights need both classes in the training split");
  const double n_total = static_cast<double>(n_pos + n_neg);
  return {n_total / (2.0 * static_cast<double>(n_neg)),
          n_total / (2.0 * static_cast<double>(n_pos))};
}

MaeModel<float> build_random_base(const RunConfig& cfg, const std::array<int, 3>& shape,
                                  std::uint64_t seed) {
  const PatchGrid grid = PatchGrid::create(shape, cfg.model.patch_size);
  ViTConfig vcfg{cfg.model.embed_dim, cfg.model.n_blocks,   cfg.model.n_heads,
                 cfg.model.mlp_dim,   cfg.model.patch_size, grid};
  DecoderConfig dcfg{cfg.model.dec_dim, cfg.model.dec_blocks, cfg.model.dec_heads,
                     cfg.model.dec_mlp_dim, grid.voxels_per_patch()};
  MaeModel<float> model = make_mae_model<float>(vcfg, dcfg);
  Rng rng(mix64(seed, 0x72616e64ULL));
  init_mae_weights(model, rng);
  return model;
}

namespace {

std::vector<ParamRef<float>> frozen_base_params(const MaeModel<float>& model) {
  auto& enc = const_cast<EncoderWeights<float>&>(model.enc);
  std::vector<ParamRef<float>> out;
  visit_params(enc, "enc", [&](std::string name, Mat<float>& t) {
    out.push_back(ParamRef<float>{std::move(name), &t});
  });
  return out;
}

double eval_score(const Volume& v, const MaeModel<float>& base,
                  const std::vector<BlockAdapters<float>>& adapters,
                  const TaskHead<float>& head) {
  const Mat<float> z = encode_full<float>(v, base, &adapters, false, nullptr, nullptr);
  const float logit = head_forward(z, head, static_cast<HeadCache<float>*>(nullptr));
  return sigmoid(static_cast<double>(logit));
}

}  // namespace

double score_volume(const Volume& v, const MaeModel<float>& base,
                    const std::vector<BlockAdapters<float>>& adapters,
                    const TaskHead<float>& head) {
  return eval_score(v, base, adapters, head);
}

AdaptedModel run_finetune(const RunConfig& cfg, const Dataset& data,
                          const std::vector<int>& train_idx, const std::vector<int>& val_idx,
                          ManifestPurpose purpose, const MaeModel<float>& base,
                          const std::filesystem::path& out_dir) {
  if (purpose == ManifestPurpose::pretrain)
    throw ConfigError("fine-tuning requires a labeled manifest");
  const bool classify = purpose == ManifestPurpose::classification;
  if (train_idx.empty() || val_idx.empty())
    throw DataError("fine-tuning needs non-empty train and validation splits");
  const int n_data = static_cast<int>(data.volumes.size());
  for (int i : train_idx)
    if (i < 0 || i >= n_data) throw InternalError("train index out of range");
  for (int i : val_idx)
    if (i < 0 || i >= n_data) throw InternalError("validation index out of range");
  if (data.shape != base.vcfg.grid.volume_shape)
    throw ShapeError("dataset shape does not match the model grid");

  auto target_of = [&](int i) -> double {
    const ManifestEntry& e = data.entries[static_cast<std::size_t>(i)];
    if (classify) {
      if (!e.label) throw DataError("'" + e.path + "' is missing a label");
      return static_cast<double>(*e.label);
    }
    if (!e.score) throw DataError("'" + e.path + "' is missing a score");
    return *e.score;
  };

  double w_pos = 1.0, w_neg = 1.0;
  if (classify) {
    std::vector<int> train_labels;
    train_labels.reserve(train_idx.size());
    for (int i : train_idx) train_labels.push_back(static_cast<int>(target_of(i)));
    std::tie(w_neg, w_pos) = class_weights(train_labels);
  }

  std::filesystem::create_directories(out_dir);
  const FinetuneConfig& fc = cfg.finetune;

  Rng root(fc.seed);
  Rng init_rng = root.substream(0x696e6974ULL);
  auto adapters = make_adapters<float>(base.vcfg, fc.lora);
  init_adapters(adapters, init_rng);
  TaskHead<float> head;
  head.resize(base.vcfg.embed_dim);
  init_head(head, init_rng);
  Rng order_rng = root.substream(0x6f726465ULL);
  Rng drop_rng = root.substream(0x64726f70ULL);

  const std::string base_hash = hash_params(frozen_base_params(base));

  std::vector<ParamRef<float>> params;
  visit_adapter_params(adapters, "adapter", [&](std::string name, Mat<float>& t) {
    params.push_back(ParamRef<float>{std::move(name), &t});
  });
  visit_params(head, "head", [&](std::string name, Mat<float>& t) {
    params.push_back(ParamRef<float>{std::move(name), &t});
  });

  auto grad_adapters = make_adapters<float>(base.vcfg, fc.lora);
  TaskHead<float> grad_head;
  grad_head.resize(base.vcfg.embed_dim);
  std::vector<ParamRef<float>> grads;
  visit_adapter_params(grad_adapters, "adapter", [&](std::string name, Mat<float>& t) {
    grads.push_back(ParamRef<float>{std::move(name), &t});
  });
  visit_params(grad_head, "head", [&](std::string name, Mat<float>& t) {
    grads.push_back(ParamRef<float>{std::move(name), &t});
  });
  auto zero_grads = [&] {
    for (auto& g : grads) g.tensor->setZero();
  };

  AdamWConfig acfg;
  acfg.weight_decay = fc.weight_decay;
  AdamW<float> opt(acfg);
  opt.init(params);

  auto validate_now = [&]() -> double {
    std::vector<double> scores, targets;
    std::vector<int> labels;
    scores.reserve(val_idx.size());
    for (int i : val_idx) {
      scores.push_back(eval_score(data.volumes[static_cast<std::size_t>(i)], base, adapters, head));
      if (classify)
        labels.push_back(static_cast<int>(target_of(i)));
      else
        targets.push_back(target_of(i));
    }
    return classify ? auc_score(scores, labels) : mse_score(scores, targets);
  };
  auto better = [&](double cand, double best) { return classify ? cand > best : cand < best; };

  AdaptedModel out;
  out.adapters = adapters;
  out.head = head;
  out.result.best_epoch = -1;
  out.result.best_val_metric = validate_now();

  std::ofstream log(out_dir / "finetune_log.jsonl");
  if (!log) throw DataError("cannot open fine-tuning log in '" + out_dir.string() + "'");

  std::vector<int> order(train_idx);
  const long n = static_cast<long>(order.size());
  const long bs = fc.batch_size;
  const std::int64_t steps_per_epoch = (n + bs - 1) / bs;
  std::int64_t step = 0;
  for (int epoch = 0; epoch < fc.epochs; ++epoch) {
    for (long i = n - 1; i > 0; --i) {
      const long j = static_cast<long>(order_rng.below(static_cast<std::uint64_t>(i + 1)));
      std::swap(order[static_cast<std::size_t>(i)], order[static_cast<std::size_t>(j)]);
    }
    double epoch_sum = 0.0;
    double lr = 0.0;
    for (std::int64_t t = 0; t < steps_per_epoch; ++t, ++step) {
      const long lo = t * bs;
      const long hi = std::min(n, lo + bs);
      zero_grads();
      double batch_loss = 0.0;
      for (long s = lo; s < hi; ++s) {
        const int idx = order[static_cast<std::size_t>(s)];
        EncodeCache<float> ecache;
        const Mat<float> z = encode_full<float>(data.volumes[static_cast<std::size_t>(idx)], base,
                                                &adapters, true, &drop_rng, &ecache);
        HeadCache<float> hcache;
        const float logit = head_forward(z, head, &hcache);
        float dlogit = 0.f;
        float loss;
        if (classify)
          loss = weighted_bce(logit, static_cast<int>(target_of(idx)), static_cast<float>(w_pos),
                              static_cast<float>(w_neg), &dlogit);
        else
          loss = sigmoid_mse(logit, static_cast<float>(target_of(idx)), &dlogit);
        if (!std::isfinite(loss))
          throw NumericError("non-finite loss at step " + std::to_string(step));
        batch_loss += loss;
        const Mat<float> dz = head_backward(dlogit, head, hcache, &grad_head);
        encoder_backward<float>(dz, base.enc, base.vcfg, &adapters, ecache.enc, nullptr,
                                &grad_adapters);
      }
      const float inv_b = 1.f / static_cast<float>(hi - lo);
      for (auto& g : grads) *g.tensor *= inv_b;
      batch_loss *= inv_b;
      lr = lr_at(step, fc.base_lr, fc.warmup_epochs, fc.epochs, steps_per_epoch);
      opt.step(params, grads, lr);
      epoch_sum += batch_loss;
    }
    const double val_metric = validate_now();
    out.result.val_metrics.push_back(val_metric);
    log << nlohmann::json{{"epoch", epoch},
                          {"step", step - 1},
                          {"lr", lr},
                          {"loss", epoch_sum / static_cast<double>(steps_per_epoch)},
                          {"val_metric", val_metric}}
               .dump()
        << "\n";
    log.flush();
    if (better(val_metric, out.result.best_val_metric)) {
      out.result.best_val_metric = val_metric;
      out.result.best_epoch = epoch;
      out.adapters = adapters;
      out.head = head;
    }
  }

  if (hash_params(frozen_base_params(base)) != base_hash)
    throw InternalError("frozen base weights changed during fine-tuning");

  ModelConfig mc{base.vcfg.embed_dim, base.vcfg.n_blocks, base.vcfg.n_heads,
                 base.vcfg.mlp_dim,   base.vcfg.patch_size, base.dcfg.dec_dim,
                 base.dcfg.n_blocks,  base.dcfg.n_heads,    base.dcfg.mlp_dim};
  std::vector<ParamRef<float>> best_params;
  visit_adapter_params(out.adapters, "adapter", [&](std::string name, Mat<float>& t) {
    best_params.push_back(ParamRef<float>{std::move(name), &t});
  });
  visit_params(out.head, "head", [&](std::string name, Mat<float>& t) {
    best_params.push_back(ParamRef<float>{std::move(name), &t});
  });
  nlohmann::json meta = {
      {"stage", "adapter"},
      {"model", model_meta(mc, base.vcfg.grid.volume_shape)},
      {"optimizer",
       {{"beta1", acfg.beta1},
        {"beta2", acfg.beta2},
        {"eps", acfg.eps},
        {"weight_decay", acfg.weight_decay},
        {"base_lr", fc.base_lr}}},
      {"step", step},
      {"rng", drop_rng.state()},
      {"base_hash", base_hash},
      {"task", classify ? "classification" : "regression"},
      {"lora", {{"r", fc.lora.r}, {"alpha", fc.lora.alpha}, {"dropout", fc.lora.dropout}}},
      {"best_epoch", out.result.best_epoch},
      {"best_val_metric", out.result.best_val_metric}};
  out.result.checkpoint_path = out_dir / "adapter.ichk";
  save_checkpoint<float>(out.result.checkpoint_path, std::move(meta), best_params);
  return out;
}

std::pair<std::vector<BlockAdapters<float>>, TaskHead<float>> load_adapter(
    const std::filesystem::path& path, const MaeModel<float>& base) {
  const CheckpointFile file = load_checkpoint(path);
  if (!file.meta.contains("stage") || file.meta["stage"].get<std::string>() != "adapter")
    throw HeaderError("'" + path.string() + "' is not an adapter checkpoint");
  LoraConfig lc;
  try {
    lc.r = file.meta.at("lora").at("r").get<int>();
    lc.alpha = file.meta.at("lora").at("alpha").get<double>();
    lc.dropout = file.meta.at("lora").at("dropout").get<double>();
  } catch (const nlohmann::json::exception& e) {
    throw HeaderError(std::string("malformed adapter description: ") + e.what());
  }
  const std::string want = file.meta.value("base_hash", "");
  if (want != hash_params(frozen_base_params(base)))
    throw DataError("adapter checkpoint was trained over a different base");
  auto adapters = make_adapters<float>(base.vcfg, lc);
  TaskHead<float> head;
  head.resize(base.vcfg.embed_dim);
  std::vector<ParamRef<float>> params;
  visit_adapter_params(adapters, "adapter", [&](std::string name, Mat<float>& t) {
    params.push_back(ParamRef<float>{std::move(name), &t});
  });
  visit_params(head, "head", [&](std::string name, Mat<float>& t) {
    params.push_back(ParamRef<float>{std::move(name), &t});
  });
  assign_params(file, params);
  return {std::move(adapters), std::move(head)};
}

}  // namespace ichor
