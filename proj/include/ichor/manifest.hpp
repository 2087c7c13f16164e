// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

namespace ichor {

/// One scan: a volume path, the study it came from, and for downstream
/// tasks exactly one of a binary label or a continuous score.
struct ManifestEntry {
  std::string path;
  std::string study_id;
  std::optional<int> label;
  std::optional<double> score;
};

enum class ManifestPurpose { pretrain, classification, regression };

/// Reads JSON-lines records {path, study_id, label?, score?}. Relative
/// volume paths are resolved against the manifest's directory.
std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries);

/// pretrain: no entry may carry a label or score. classification: every
/// entry carries a 0/1 label. regression: every entry carries a score in
/// [0,1]. Anything mixed or incomplete is a data error.
void validate_manifest(const std::vector<ManifestEntry>& entries, ManifestPurpose purpose);

/// Purpose implied by the annotations present on every entry.
ManifestPurpose infer_purpose(const std::vector<ManifestEntry>& entries);

}  // namespace ichor
