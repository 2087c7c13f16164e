// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdio>
#include <string>
#include <utility>
#include <vector>

#include "ichor/errors.hpp"
#include "ichor/vit.hpp"

namespace ichor {

struct DecoderConfig {
  int dec_dim = 384;
  int n_blocks = 4;
  int n_heads = 12;
  int mlp_dim = 1536;
  int out_dim = 1728;  // P^3

  void validate() const {
    if (dec_dim <= 0 || n_blocks <= 0 || n_heads <= 0 || mlp_dim <= 0 || out_dim <= 0)
      throw ConfigError("decoder dimensions must be positive");
    if (dec_dim % n_heads != 0)
      throw ConfigError("dec_dim " + std::to_string(dec_dim) + " is not divisible by dec_heads " +
                        std::to_string(n_heads));
    if (dec_dim % 6 != 0)
      throw ConfigError("dec_dim " + std::to_string(dec_dim) + " is not divisible by 6");
  }
};

template <class T>
struct DecoderWeights {
  Linear<T> embed;    // enc_dim x dec_dim
  Mat<T> mask_token;  // 1 x dec_dim
  std::vector<BlockWeights<T>> blocks;
  Norm<T> final_norm;
  Linear<T> pred;  // dec_dim x P^3

  void resize(int enc_dim, const DecoderConfig& cfg) {
    cfg.validate();
    embed.resize(enc_dim, cfg.dec_dim);
    mask_token.setZero(1, cfg.dec_dim);
    blocks.assign(cfg.n_blocks, BlockWeights<T>());
    for (auto& b : blocks) b.resize(cfg.dec_dim, cfg.mlp_dim);
    final_norm.resize(cfg.dec_dim);
    pred.resize(cfg.dec_dim, cfg.out_dim);
  }
};

// ---------------------------------------------------------------------------
// Parameter enumeration. Every consumer of the parameter list (optimizer,
// checkpoint, hashing, zeroing) walks tensors through these visitors, so the
// ordering is defined in exactly one place.
// ---------------------------------------------------------------------------

inline std::string block_tag(std::size_t i) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "block%02zu", i);
  return buf;
}

template <class T, class F>
void visit_params(Linear<T>& l, const std::string& p, F&& f) {
  f(p + ".w", l.w);
  f(p + ".b", l.b);
}

template <class T, class F>
void visit_params(Norm<T>& n, const std::string& p, F&& f) {
  f(p + ".gamma", n.gamma);
  f(p + ".beta", n.beta);
}

template <class T, class F>
void visit_params(BlockWeights<T>& b, const std::string& p, F&& f) {
  visit_params(b.ln1, p + ".ln1", f);
  visit_params(b.attn.q, p + ".attn.q", f);
  visit_params(b.attn.k, p + ".attn.k", f);
  visit_params(b.attn.v, p + ".attn.v", f);
  visit_params(b.attn.o, p + ".attn.o", f);
  visit_params(b.ln2, p + ".ln2", f);
  visit_params(b.fc1, p + ".fc1", f);
  visit_params(b.fc2, p + ".fc2", f);
}

template <class T, class F>
void visit_params(EncoderWeights<T>& w, const std::string& p, F&& f) {
  visit_params(w.patch_embed, p + ".patch_embed", f);
  for (std::size_t i = 0; i < w.blocks.size(); ++i)
    visit_params(w.blocks[i], p + "." + block_tag(i), f);
  visit_params(w.final_norm, p + ".final_norm", f);
}

template <class T, class F>
void visit_params(DecoderWeights<T>& w, const std::string& p, F&& f) {
  visit_params(w.embed, p + ".embed", f);
  f(p + ".mask_token", w.mask_token);
  for (std::size_t i = 0; i < w.blocks.size(); ++i)
    visit_params(w.blocks[i], p + "." + block_tag(i), f);
  visit_params(w.final_norm, p + ".final_norm", f);
  visit_params(w.pred, p + ".pred", f);
}

template <class T>
struct ParamRef {
  std::string name;
  Mat<T>* tensor;
};

template <class T, class W>
void append_params(W& w, const std::string& prefix, std::vector<ParamRef<T>>& out) {
  visit_params(w, prefix, [&out](const std::string& name, Mat<T>& m) {
    out.push_back(ParamRef<T>{name, &m});
  });
}

template <class T, class W>
void zero_params(W& w, const std::string& prefix = "g") {
  visit_params(w, prefix, [](const std::string&, Mat<T>& m) { m.setZero(); });
}

// ---------------------------------------------------------------------------
// Decoder forward/backward
// ---------------------------------------------------------------------------

template <class T>
struct DecoderCache {
  std::vector<BlockCache<T>> blocks;
  NormCache<T> final_norm;
  Mat<T> hidden;  // final-norm output, input to the prediction head
};

/// Full decoder sequence: projected visible tokens at their original patch
/// positions, the shared mask token at masked positions, plus the decoder
/// positional table everywhere.
template <class T>
Mat<T> assemble_decoder_sequence(const TokenSeq<T>& zv, const MaskPlan& plan,
                                 const DecoderWeights<T>& w, const Mat<T>& dec_pe) {
  if (zv.positions != plan.visible)
    throw ShapeError("visible token positions do not match the mask plan");
  if (dec_pe.rows() != plan.n_patches || dec_pe.cols() != w.embed.w.cols())
    throw ShapeError("decoder positional table shape mismatch");
  Mat<T> proj = (zv.values * w.embed.w).rowwise() + w.embed.b.row(0);
  Mat<T> u(plan.n_patches, w.embed.w.cols());
  for (int i : plan.masked) u.row(i) = w.mask_token.row(0) + dec_pe.row(i);
  for (std::size_t r = 0; r < plan.visible.size(); ++r) {
    const int i = plan.visible[r];
    u.row(i) = proj.row(static_cast<Eigen::Index>(r)) + dec_pe.row(i);
  }
  return u;
}

template <class T>
Mat<T> assemble_backward(const Mat<T>& du, const TokenSeq<T>& zv, const MaskPlan& plan,
                         const DecoderWeights<T>& w, DecoderWeights<T>* dw) {
  Mat<T> dproj(static_cast<Eigen::Index>(plan.visible.size()), du.cols());
  for (std::size_t r = 0; r < plan.visible.size(); ++r)
    dproj.row(static_cast<Eigen::Index>(r)) = du.row(plan.visible[r]);
  if (dw) {
    dw->embed.w.noalias() += zv.values.transpose() * dproj;
    dw->embed.b.row(0).array() += dproj.array().colwise().sum();
    for (int i : plan.masked) dw->mask_token.row(0) += du.row(i);
  }
  return dproj * w.embed.w.transpose();
}

template <class T>
Mat<T> decode_and_predict(const Mat<T>& u, const DecoderWeights<T>& w, const DecoderConfig& cfg,
                          DecoderCache<T>* cache) {
  if (u.cols() != cfg.dec_dim) throw ShapeError("decoder input width does not match dec_dim");
  if (cache) cache->blocks.assign(w.blocks.size(), BlockCache<T>());
  Mat<T> x = u;
  BlockCache<T> scratch;
  for (std::size_t b = 0; b < w.blocks.size(); ++b) {
    BlockCache<T>& bc = cache ? cache->blocks[b] : scratch;
    x = block_fwd<T>(x, w.blocks[b], cfg.n_heads, nullptr, false, nullptr, bc);
    if (!x.allFinite())
      throw NumericError("non-finite activations in decoder block " + std::to_string(b));
  }
  Mat<T> hidden = norm_fwd(x, w.final_norm, cache ? &cache->final_norm : nullptr);
  Mat<T> pred = (hidden * w.pred.w).rowwise() + w.pred.b.row(0);
  if (cache) cache->hidden = std::move(hidden);
  return pred;
}

template <class T>
Mat<T> decode_backward(const Mat<T>& dpred, const DecoderWeights<T>& w, const DecoderConfig& cfg,
                       const DecoderCache<T>& cache, DecoderWeights<T>* dw) {
  if (dw) {
    dw->pred.w.noalias() += cache.hidden.transpose() * dpred;
    dw->pred.b.row(0).array() += dpred.array().colwise().sum();
  }
  Mat<T> dhidden = dpred * w.pred.w.transpose();
  Mat<T> dx = norm_bwd(dhidden, w.final_norm, cache.final_norm, dw ? &dw->final_norm : nullptr);
  for (std::size_t bi = w.blocks.size(); bi-- > 0;)
    dx = block_bwd<T>(dx, w.blocks[bi], cfg.n_heads, nullptr, cache.blocks[bi],
                      dw ? &dw->blocks[bi] : nullptr, nullptr);
  return dx;
}

// ---------------------------------------------------------------------------
// Full masked-autoencoder model
// ---------------------------------------------------------------------------

template <class T>
struct MaeModel {
  ViTConfig vcfg;
  DecoderConfig dcfg;
  EncoderWeights<T> enc;
  DecoderWeights<T> dec;
  Mat<T> enc_pe;  // fixed, recomputed from config
  Mat<T> dec_pe;
};

template <class T>
MaeModel<T> make_mae_model(const ViTConfig& vcfg, const DecoderConfig& dcfg) {
  vcfg.validate();
  DecoderConfig d = dcfg;
  d.out_dim = vcfg.patch_size * vcfg.patch_size * vcfg.patch_size;
  d.validate();
  if (vcfg.grid.n_patches <= 0) throw ConfigError("model grid is empty");
  MaeModel<T> m;
  m.vcfg = vcfg;
  m.dcfg = d;
  m.enc.resize(vcfg);
  m.dec.resize(vcfg.embed_dim, d);
  m.enc_pe = pos_embed_3d<T>(vcfg.grid, vcfg.embed_dim);
  m.dec_pe = pos_embed_3d<T>(vcfg.grid, d.dec_dim);
  return m;
}

template <class T>
void init_mae_weights(MaeModel<T>& m, Rng& rng) {
  trunc_normal_fill(m.enc.patch_embed.w, rng, 0.02);
  for (auto& b : m.enc.blocks) init_block(b, rng);
  trunc_normal_fill(m.dec.embed.w, rng, 0.02);
  trunc_normal_fill(m.dec.mask_token, rng, 0.02);
  for (auto& b : m.dec.blocks) init_block(b, rng);
  trunc_normal_fill(m.dec.pred.w, rng, 0.02);
}

template <class T>
std::vector<ParamRef<T>> collect_params(MaeModel<T>& m) {
  std::vector<ParamRef<T>> out;
  append_params<T>(m.enc, "enc", out);
  append_params<T>(m.dec, "dec", out);
  return out;
}

template <class T>
struct MaeGrads {
  EncoderWeights<T> enc;
  DecoderWeights<T> dec;

  static MaeGrads<T> zeros_like(const MaeModel<T>& m) {
    MaeGrads<T> g;
    g.enc.resize(m.vcfg);
    g.dec.resize(m.vcfg.embed_dim, m.dcfg);
    g.zero();
    return g;
  }
  void zero() {
    zero_params<T>(enc);
    zero_params<T>(dec);
  }
  std::vector<ParamRef<T>> params() {
    std::vector<ParamRef<T>> out;
    append_params<T>(enc, "enc", out);
    append_params<T>(dec, "dec", out);
    return out;
  }
};

template <class T>
struct MaeCache {
  Mat<T> patches;  // targets, N x P^3
  MaskPlan plan;
  TokenSeq<T> tokens;  // embedded visible tokens
  EncoderCache<T> enc;
  TokenSeq<T> zv;  // encoder output with positions
  Mat<T> u;        // assembled decoder input
  DecoderCache<T> dec;
  Mat<T> pred;  // N x P^3
};

/// End-to-end pretraining forward pass. Returns the masked reconstruction
/// loss; all intermediate state needed by mae_backward lands in the cache.
template <class T>
T mae_forward_loss(const Volume& v, double rho, const MaeModel<T>& model, Rng& mask_rng,
                   MaeCache<T>& cache) {
  auto [patches, grid] = patchify<T>(v, model.vcfg.patch_size);
  if (!(grid == model.vcfg.grid))
    throw ShapeError("volume patch grid does not match the model grid");
  cache.patches = std::move(patches);
  cache.plan = sample_mask(grid.n_patches, rho, mask_rng);
  cache.tokens =
      embed_visible(cache.patches, cache.plan, model.enc.patch_embed, model.enc_pe);
  cache.zv.positions = cache.tokens.positions;
  cache.zv.values = encoder_forward<T>(cache.tokens.values, model.enc, model.vcfg, nullptr, false,
                                       nullptr, &cache.enc);
  cache.u = assemble_decoder_sequence(cache.zv, cache.plan, model.dec, model.dec_pe);
  cache.pred = decode_and_predict(cache.u, model.dec, model.dcfg, &cache.dec);
  return masked_mse<T>(cache.pred, cache.patches, cache.plan, nullptr);
}

template <class T>
void mae_backward(const MaeCache<T>& cache, const MaeModel<T>& model, MaeGrads<T>& g) {
  Mat<T> dpred;
  masked_mse<T>(cache.pred, cache.patches, cache.plan, &dpred);
  Mat<T> du = decode_backward(dpred, model.dec, model.dcfg, cache.dec, &g.dec);
  Mat<T> dz = assemble_backward(du, cache.zv, cache.plan, model.dec, &g.dec);
  Mat<T> dtok =
      encoder_backward<T>(dz, model.enc, model.vcfg, nullptr, cache.enc, &g.enc, nullptr);
  const auto& vis = cache.plan.visible;
  Mat<T> pv(static_cast<Eigen::Index>(vis.size()), cache.patches.cols());
  for (std::size_t r = 0; r < vis.size(); ++r)
    pv.row(static_cast<Eigen::Index>(r)) = cache.patches.row(vis[r]);
  g.enc.patch_embed.w.noalias() += pv.transpose() * dtok;
  g.enc.patch_embed.b.row(0).array() += dtok.array().colwise().sum();
}

/// Output volume keeps the input's voxels on visible patches and takes the
/// model's predictions on masked patches.
template <class T>
Volume stitch_reconstruction(const Volume& v, const Mat<T>& pred, const MaskPlan& plan,
                             int patch_size) {
  auto [patches, grid] = patchify<T>(v, patch_size);
  if (pred.rows() != grid.n_patches || pred.cols() != grid.voxels_per_patch())
    throw ShapeError("prediction shape does not match the volume patch grid");
  if (plan.n_patches != grid.n_patches)
    throw ShapeError("mask plan does not match the volume patch grid");
  for (int i : plan.masked) patches.row(i) = pred.row(i);
  return unpatchify(patches, grid, v.voxel_size_mm, v.unit);
}

}  // namespace ichor
