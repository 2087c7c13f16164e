// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <filesystem>
#include <string>
#include <utility>
#include <vector>

#include "ichor/config.hpp"
#include "ichor/dataset.hpp"
#include "ichor/model.hpp"

namespace ichor {

// ---------------------------------------------------------------------------
// Adapters
// ---------------------------------------------------------------------------

template <class T>
std::vector<BlockAdapters<T>> make_adapters(const ViTConfig& cfg, const LoraConfig& lc) {
  if (lc.r < 1) throw ConfigError("lora rank must be at least 1");
  if (!(lc.dropout >= 0.0 && lc.dropout < 1.0)) throw ConfigError("lora dropout must lie in [0,1)");
  std::vector<BlockAdapters<T>> ads(cfg.n_blocks);
  const int d = cfg.embed_dim;
  for (auto& b : ads) {
    for (LoraPair<T>* p : {&b.attn.q, &b.attn.k, &b.attn.v, &b.attn.o}) {
      p->resize(d, d, lc.r);
      p->alpha = lc.alpha;
      p->dropout_p = lc.dropout;
    }
  }
  return ads;
}

/// Identity start: the down projections are trunc-normal, the up projections
/// stay zero, so the adapted forward equals the base forward.
template <class T>
void init_adapters(std::vector<BlockAdapters<T>>& ads, Rng& rng) {
  for (auto& b : ads) {
    for (LoraPair<T>* p : {&b.attn.q, &b.attn.k, &b.attn.v, &b.attn.o}) {
      trunc_normal_fill(p->down, rng, 0.02);
      p->up.setZero();
    }
  }
}

template <class T, class F>
void visit_params(LoraPair<T>& a, const std::string& p, F&& f) {
  f(p + ".down", a.down);
  f(p + ".up", a.up);
}

template <class T, class F>
void visit_params(AttnAdapters<T>& a, const std::string& p, F&& f) {
  visit_params(a.q, p + ".q", f);
  visit_params(a.k, p + ".k", f);
  visit_params(a.v, p + ".v", f);
  visit_params(a.o, p + ".o", f);
}

template <class T, class F>
void visit_params(BlockAdapters<T>& a, const std::string& p, F&& f) {
  visit_params(a.attn, p + ".attn", f);
}

template <class T, class F>
void visit_adapter_params(std::vector<BlockAdapters<T>>& ads, const std::string& p, F&& f) {
  for (std::size_t i = 0; i < ads.size(); ++i) visit_params(ads[i], p + "." + block_tag(i), f);
}

template <class T>
Linear<T> merge_lora(const Linear<T>& base, const LoraPair<T>& ad) {
  if (ad.down.rows() != base.w.rows() || ad.up.cols() != base.w.cols())
    throw ShapeError("adapter shape does not match the base projection");
  Linear<T> out = base;
  out.w.noalias() += ad.scale() * (ad.down * ad.up);
  return out;
}

/// Encoder with every attention adapter folded into its base projection.
template <class T>
EncoderWeights<T> merge_adapters(const EncoderWeights<T>& enc,
                                 const std::vector<BlockAdapters<T>>& ads) {
  if (ads.size() != enc.blocks.size())
    throw ShapeError("adapter count does not match encoder depth");
  EncoderWeights<T> out = enc;
  for (std::size_t b = 0; b < ads.size(); ++b) {
    out.blocks[b].attn.q = merge_lora(enc.blocks[b].attn.q, ads[b].attn.q);
    out.blocks[b].attn.k = merge_lora(enc.blocks[b].attn.k, ads[b].attn.k);
    out.blocks[b].attn.v = merge_lora(enc.blocks[b].attn.v, ads[b].attn.v);
    out.blocks[b].attn.o = merge_lora(enc.blocks[b].attn.o, ads[b].attn.o);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Full-sequence encoding (no masking) and the task head
// ---------------------------------------------------------------------------

inline MaskPlan full_visibility_plan(int n_patches) {
  MaskPlan plan;
  plan.n_patches = n_patches;
  plan.ratio = 0.0;
  plan.visible.resize(n_patches);
  for (int i = 0; i < n_patches; ++i) plan.visible[i] = i;
  return plan;
}

template <class T>
struct EncodeCache {
  Mat<T> patches;
  MaskPlan plan;
  TokenSeq<T> tokens;
  EncoderCache<T> enc;
};

/// Encodes all N patches (the no-masking path); adapters, when given, act
/// inside the attention projections.
template <class T>
Mat<T> encode_full(const Volume& v, const MaeModel<T>& model,
                   const std::vector<BlockAdapters<T>>* adapters, bool training, Rng* rng,
                   EncodeCache<T>* cache) {
  auto [patches, grid] = patchify<T>(v, model.vcfg.patch_size);
  if (!(grid == model.vcfg.grid))
    throw ShapeError("volume patch grid does not match the model grid");
  EncodeCache<T> local;
  EncodeCache<T>& c = cache ? *cache : local;
  c.patches = std::move(patches);
  c.plan = full_visibility_plan(grid.n_patches);
  c.tokens = embed_visible(c.patches, c.plan, model.enc.patch_embed, model.enc_pe);
  return encoder_forward(c.tokens.values, model.enc, model.vcfg, adapters, training, rng, &c.enc);
}

template <class T>
struct TaskHead {
  Norm<T> norm;
  Linear<T> linear;

  void resize(int d) {
    norm.resize(d);
    linear.resize(d, 1);
  }
};

template <class T, class F>
void visit_params(TaskHead<T>& h, const std::string& p, F&& f) {
  visit_params(h.norm, p + ".norm", f);
  visit_params(h.linear, p + ".linear", f);
}

template <class T>
void init_head(TaskHead<T>& h, Rng& rng) {
  trunc_normal_fill(h.linear.w, rng, 0.02);
}

template <class T>
struct HeadCache {
  Eigen::Index n_rows = 0;
  Mat<T> normed;  // 1 x d
  NormCache<T> norm;
};

/// Global average pooling over token rows, then norm and a linear map to a
/// single real.
template <class T>
T head_forward(const Mat<T>& z, const TaskHead<T>& head, HeadCache<T>* cache) {
  if (z.rows() == 0) throw ShapeError("task head input has no tokens");
  if (z.cols() != head.norm.gamma.cols()) throw ShapeError("task head width mismatch");
  Mat<T> gap = z.colwise().mean();
  HeadCache<T> local;
  HeadCache<T>& c = cache ? *cache : local;
  c.n_rows = z.rows();
  c.normed = norm_fwd(gap, head.norm, &c.norm);
  return (c.normed * head.linear.w)(0, 0) + head.linear.b(0, 0);
}

/// Returns d(out)/d(z); head parameter gradients accumulate into dhead.
template <class T>
Mat<T> head_backward(T dout, const TaskHead<T>& head, const HeadCache<T>& cache,
                     TaskHead<T>* dhead) {
  if (dhead) {
    dhead->linear.w.noalias() += cache.normed.transpose() * dout;
    dhead->linear.b(0, 0) += dout;
  }
  Mat<T> dnormed = dout * head.linear.w.transpose();
  Mat<T> dgap = norm_bwd(dnormed, head.norm, cache.norm, dhead ? &dhead->norm : nullptr);
  const T inv_n = T(1) / static_cast<T>(cache.n_rows);
  Mat<T> dz(cache.n_rows, dgap.cols());
  for (Eigen::Index r = 0; r < cache.n_rows; ++r) dz.row(r) = inv_n * dgap.row(0);
  return dz;
}

// ---------------------------------------------------------------------------
// Task losses
// ---------------------------------------------------------------------------

template <class T>
T stable_softplus(T x) {
  return std::max(x, T(0)) + std::log1p(std::exp(-std::abs(x)));
}

template <class T>
T sigmoid(T x) {
  if (x >= T(0)) return T(1) / (T(1) + std::exp(-x));
  const T e = std::exp(x);
  return e / (T(1) + e);
}

/// Class-weighted binary cross-entropy on a logit, in log-sum-exp form.
template <class T>
T weighted_bce(T logit, int label, T w_pos, T w_neg, T* dlogit) {
  if (label != 0 && label != 1) throw DataError("BCE label must be 0 or 1");
  if (!(w_pos > T(0)) || !(w_neg > T(0))) throw DataError("class weights must be positive");
  if (label == 1) {
    if (dlogit) *dlogit = w_pos * (sigmoid(logit) - T(1));
    return w_pos * stable_softplus(-logit);
  }
  if (dlogit) *dlogit = w_neg * sigmoid(logit);
  return w_neg * stable_softplus(logit);
}

/// Squared error on the sigmoid-squashed logit, keeping predictions in the
/// score range [0,1].
template <class T>
T sigmoid_mse(T logit, T target, T* dlogit) {
  const T p = sigmoid(logit);
  const T diff = p - target;
  if (dlogit) *dlogit = T(2) * diff * p * (T(1) - p);
  return diff * diff;
}

/// w_y = n_total / (2 n_y); returns {w_neg, w_pos}.
std::pair<double, double> class_weights(const std::vector<int>& labels);

// ---------------------------------------------------------------------------
// Fine-tuning driver
// ---------------------------------------------------------------------------

struct FinetuneResult {
  double best_val_metric = 0.0;  // AUC for classification, MSE for regression
  int best_epoch = -1;           // -1 = adapter initialization
  std::vector<double> val_metrics;
  std::filesystem::path checkpoint_path;
};

struct AdaptedModel {
  std::vector<BlockAdapters<float>> adapters;
  TaskHead<float> head;
  FinetuneResult result;
};

/// Builds the untrained frozen base for the rand-init baseline.
MaeModel<float> build_random_base(const RunConfig& cfg, const std::array<int, 3>& shape,
                                  std::uint64_t seed);

/// Trains adapters and head over the frozen base; the base byte hash is
/// verified unchanged. Selection keeps the epoch with the best validation
/// metric. Writes an adapter-stage checkpoint plus a JSON-lines log.
AdaptedModel run_finetune(const RunConfig& cfg, const Dataset& data,
                          const std::vector<int>& train_idx, const std::vector<int>& val_idx,
                          ManifestPurpose purpose, const MaeModel<float>& base,
                          const std::filesystem::path& out_dir);

/// Eval-mode score of one volume: sigmoid of the head output.
double score_volume(const Volume& v, const MaeModel<float>& base,
                    const std::vector<BlockAdapters<float>>& adapters,
                    const TaskHead<float>& head);

/// Reads an adapter-stage checkpoint back; the stored base hash must match
/// the provided frozen base.
std::pair<std::vector<BlockAdapters<float>>, TaskHead<float>> load_adapter(
    const std::filesystem::path& path, const MaeModel<float>& base);

}  // namespace ichor
