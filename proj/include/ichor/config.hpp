// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <string>

#include <json.hpp>

namespace ichor {

struct ModelConfig {
  int embed_dim = 768;
  int n_blocks = 12;
  int n_heads = 12;
  int mlp_dim = 3072;
  int patch_size = 12;
  int dec_dim = 384;
  int dec_blocks = 4;
  int dec_heads = 12;
  int dec_mlp_dim = 1536;
};

struct LoraConfig {
  int r = 8;
  double alpha = 16.0;
  double dropout = 0.2;
};

struct PretrainConfig {
  int epochs = 400;
  int warmup_epochs = 40;
  int batch_size = 48;
  double base_lr = 1.5e-4;
  double weight_decay = 0.05;
  double rho = 0.5;
  double alpha_bal = 0.5;
  std::uint64_t seed = 42;
  int checkpoint_every = 0;  // epochs between intermediate checkpoints, 0 = final only
  double grad_clip = 0.0;    // global-norm clip, 0 = off
};

struct FinetuneConfig {
  int epochs = 100;
  int warmup_epochs = 10;
  int batch_size = 8;
  double base_lr = 5e-4;
  double weight_decay = 0.05;
  LoraConfig lora;
  std::uint64_t seed = 42;
};

struct DataConfig {
  std::string manifest_path;
  std::string format = "auto";  // auto | ivol | nifti
};

struct EvalConfig {
  int k = 5;
  std::uint64_t seed = 42;
};

struct RunConfig {
  ModelConfig model;
  PretrainConfig pretrain;
  FinetuneConfig finetune;
  DataConfig data;
  EvalConfig eval;

  /// Parses a config document. Unknown keys anywhere are rejected with a
  /// single error listing every offending dotted key.
  static RunConfig from_json(const nlohmann::json& j);
  static RunConfig from_file(const std::filesystem::path& path);

  /// Fully resolved document, defaults filled in.
  nlohmann::json to_json() const;

  void validate() const;

  /// FNV-1a of the resolved document, for report provenance.
  std::string config_hash() const;
};

}  // namespace ichor
