// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "ichor/errors.hpp"
#include "ichor/nn.hpp"
#include "ichor/patch.hpp"

namespace ichor {

struct ViTConfig {
  int embed_dim = 768;
  int n_blocks = 12;
  int n_heads = 12;
  int mlp_dim = 3072;
  int patch_size = 12;
  PatchGrid grid;

  void validate() const {
    if (embed_dim <= 0 || n_blocks <= 0 || n_heads <= 0 || mlp_dim <= 0 || patch_size <= 0)
      throw ConfigError("encoder dimensions must be positive");
    if (embed_dim % n_heads != 0)
      throw ConfigError("embed_dim " + std::to_string(embed_dim) + " is not divisible by n_heads " +
                        std::to_string(n_heads));
    if (embed_dim % 6 != 0)
      throw ConfigError("embed_dim " + std::to_string(embed_dim) +
                        " is not divisible by 6 (three axes x sin/cos pairs)");
    if (mlp_dim < embed_dim) throw ConfigError("mlp_dim must be at least embed_dim");
  }
};

template <class T>
struct EncoderWeights {
  Linear<T> patch_embed;  // P^3 x d
  std::vector<BlockWeights<T>> blocks;
  Norm<T> final_norm;

  void resize(const ViTConfig& cfg) {
    cfg.validate();
    const int p3 = cfg.patch_size * cfg.patch_size * cfg.patch_size;
    patch_embed.resize(p3, cfg.embed_dim);
    blocks.assign(cfg.n_blocks, BlockWeights<T>());
    for (auto& b : blocks) b.resize(cfg.embed_dim, cfg.mlp_dim);
    final_norm.resize(cfg.embed_dim);
  }
};

/// Token rows plus the patch index each row came from.
template <class T>
struct TokenSeq {
  Mat<T> values;
  std::vector<int> positions;
};

/// Fixed 3D sinusoidal table: dimension split into three d/3 groups, one per
/// grid axis; within a group, frequency j in [0, d/6) encodes the axis
/// coordinate c as angle = c / 10000^(2j/(d/3)), sin in even slots, cos in
/// odd slots. Rows follow patch index order.
template <class T>
Mat<T> pos_embed_3d(const PatchGrid& grid, int d) {
  if (d <= 0 || d % 6 != 0)
    throw ConfigError("positional embedding width " + std::to_string(d) +
                      " is not divisible by 6");
  const int group = d / 3;
  const int n_freq = d / 6;
  Mat<T> table(grid.n_patches, d);
  for (int i = 0; i < grid.n_patches; ++i) {
    const auto c = grid.coords_of(i);
    for (int axis = 0; axis < 3; ++axis) {
      const int off = axis * group;
      for (int j = 0; j < n_freq; ++j) {
        const double freq = std::pow(10000.0, 2.0 * j / static_cast<double>(group));
        const double angle = static_cast<double>(c[axis]) / freq;
        table(i, off + 2 * j) = static_cast<T>(std::sin(angle));
        table(i, off + 2 * j + 1) = static_cast<T>(std::cos(angle));
      }
    }
  }
  return table;
}

/// Embeds the visible patches only: row for patch i in V is
/// patch_embed(p_i) + pe[i], rows in ascending patch index order.
template <class T>
TokenSeq<T> embed_visible(const Mat<T>& patches, const MaskPlan& plan,
                          const Linear<T>& patch_embed, const Mat<T>& pe) {
  if (patches.rows() != plan.n_patches)
    throw ShapeError("patch set row count does not match the mask plan");
  if (patches.cols() != patch_embed.w.rows())
    throw ShapeError("patch voxel count does not match the embedding input width");
  if (pe.rows() != plan.n_patches || pe.cols() != patch_embed.w.cols())
    throw ShapeError("positional table shape does not match the embedding");
  TokenSeq<T> seq;
  seq.positions = plan.visible;
  seq.values.resize(static_cast<Eigen::Index>(plan.visible.size()), patch_embed.w.cols());
  for (size_t r = 0; r < plan.visible.size(); ++r) {
    const int i = plan.visible[r];
    seq.values.row(static_cast<Eigen::Index>(r)) =
        patches.row(i) * patch_embed.w + patch_embed.b.row(0) + pe.row(i);
  }
  return seq;
}

template <class T>
struct EncoderCache {
  std::vector<BlockCache<T>> blocks;
  NormCache<T> final_norm;
};

template <class T>
Mat<T> encoder_forward(const Mat<T>& tokens, const EncoderWeights<T>& w, const ViTConfig& cfg,
                       const std::vector<BlockAdapters<T>>* adapters, bool training, Rng* rng,
                       EncoderCache<T>* cache) {
  if (tokens.cols() != cfg.embed_dim) throw ShapeError("token width does not match embed_dim");
  if (adapters && adapters->size() != w.blocks.size())
    throw ShapeError("adapter count does not match encoder depth");
  if (cache) cache->blocks.assign(w.blocks.size(), BlockCache<T>());
  Mat<T> x = tokens;
  BlockCache<T> scratch;
  for (size_t b = 0; b < w.blocks.size(); ++b) {
    BlockCache<T>& bc = cache ? cache->blocks[b] : scratch;
    x = block_fwd(x, w.blocks[b], cfg.n_heads, adapters ? &(*adapters)[b] : nullptr, training, rng,
                  bc);
    if (!x.allFinite())
      throw NumericError("non-finite activations in encoder block " + std::to_string(b));
  }
  return norm_fwd(x, w.final_norm, cache ? &cache->final_norm : nullptr);
}

template <class T>
Mat<T> encoder_backward(const Mat<T>& dy, const EncoderWeights<T>& w, const ViTConfig& cfg,
                        const std::vector<BlockAdapters<T>>* adapters, const EncoderCache<T>& cache,
                        EncoderWeights<T>* dw, std::vector<BlockAdapters<T>>* dad) {
  Mat<T> dx = norm_bwd(dy, w.final_norm, cache.final_norm, dw ? &dw->final_norm : nullptr);
  for (size_t bi = w.blocks.size(); bi-- > 0;) {
    dx = block_bwd(dx, w.blocks[bi], cfg.n_heads, adapters ? &(*adapters)[bi] : nullptr,
                   cache.blocks[bi], dw ? &dw->blocks[bi] : nullptr, dad ? &(*dad)[bi] : nullptr);
  }
  return dx;
}

template <class T>
void init_block(BlockWeights<T>& b, Rng& rng) {
  trunc_normal_fill(b.attn.q.w, rng, 0.02);
  trunc_normal_fill(b.attn.k.w, rng, 0.02);
  trunc_normal_fill(b.attn.v.w, rng, 0.02);
  trunc_normal_fill(b.attn.o.w, rng, 0.02);
  trunc_normal_fill(b.fc1.w, rng, 0.02);
  trunc_normal_fill(b.fc2.w, rng, 0.02);
}

template <class T>
EncoderWeights<T> init_encoder(const ViTConfig& cfg, Rng& rng) {
  EncoderWeights<T> w;
  w.resize(cfg);
  trunc_normal_fill(w.patch_embed.w, rng, 0.02);
  for (auto& b : w.blocks) init_block(b, rng);
  return w;
}

}  // namespace ichor
