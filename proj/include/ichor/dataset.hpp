// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "ichor/manifest.hpp"
#include "ichor/volume.hpp"

namespace ichor {

/// Raw CBF inputs are resampled to this cube after foreground cropping.
inline constexpr std::array<int, 3> kRawTargetShape{96, 96, 96};

/// Reads one volume, dispatching on the format ("ivol", "nifti", or "auto"
/// to pick by file extension).
Volume load_volume(const std::filesystem::path& path, const std::string& format);

/// Canonical model input: raw CBF volumes are cropped to their foreground
/// bounding box, resampled to kRawTargetShape, and normalized to [0,1];
/// already-normalized volumes pass through untouched.
Volume preprocess_volume(Volume v);

struct Dataset {
  std::vector<ManifestEntry> entries;
  std::vector<Volume> volumes;  // aligned with entries
  std::array<int, 3> shape{0, 0, 0};
};

/// Loads and preprocesses every manifest entry. All volumes must agree on
/// shape and the shape must be divisible by patch_size; failures name the
/// offending path.
Dataset load_dataset(const std::vector<ManifestEntry>& entries, const std::string& format,
                     int patch_size);

}  // namespace ichor
