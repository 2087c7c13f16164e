// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ichor/checkpoint.hpp"
#include "ichor/config.hpp"
#include "ichor/dataset.hpp"
#include "ichor/model.hpp"

namespace ichor {

/// Per-scan weight n_j^(-alpha) for a scan belonging to study j, so study
/// mass scales as n_j^(1-alpha): alpha 0 keeps natural frequencies, alpha 1
/// balances studies exactly.
std::map<std::string, double> per_study_weight(const std::map<std::string, long>& study_sizes,
                                               double alpha_bal);

/// The per-study weights expanded to one weight per manifest entry.
std::vector<double> sampling_weights(const std::vector<ManifestEntry>& entries, double alpha_bal);

/// Weighted sampling with replacement via the cumulative distribution.
class WeightedSampler {
 public:
  explicit WeightedSampler(const std::vector<double>& weights);
  int draw(Rng& rng) const;

 private:
  std::vector<double> cum_;
};

/// Serializable model description: architecture plus the volume grid it was
/// built for.
nlohmann::json model_meta(const ModelConfig& mc, const std::array<int, 3>& volume_shape);

/// Rebuilds the encoder/decoder configs recorded by model_meta.
std::pair<ViTConfig, DecoderConfig> model_from_meta(const nlohmann::json& meta);

struct PretrainResult {
  std::vector<double> step_losses;   // batch-mean masked MSE per optimizer step
  std::vector<double> epoch_losses;  // mean over each epoch's steps
  std::filesystem::path checkpoint_path;
};

/// Full pretraining run: weighted sampling, per-batch AdamW steps on the
/// warmup+cosine schedule, JSON-lines epoch log, ICHK checkpoints.
PretrainResult run_pretraining(const RunConfig& cfg, const Dataset& data,
                               const std::filesystem::path& out_dir);

/// Convenience wrapper resolving the manifest from the config.
PretrainResult run_pretraining(const RunConfig& cfg, const std::filesystem::path& out_dir);

/// Builds the model recorded in a pretraining checkpoint and loads its
/// weights.
MaeModel<float> load_pretrained(const std::filesystem::path& path);

}  // namespace ichor
