// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <string>
#include <vector>

namespace ichor {

enum class IntensityUnit {
  raw_cbf_ml_per_100g_min,
  normalized_unit_interval,
};

std::string to_string(IntensityUnit unit);
IntensityUnit intensity_unit_from_string(const std::string& s);

/// Dense 3D scalar field. Storage order: index (i, j, k) with i fastest,
/// i.e. offset = i + H*(j + W*k) for shape (H, W, D).
struct Volume {
  std::array<int, 3> shape{0, 0, 0};  // (H, W, D)
  std::array<float, 3> voxel_size_mm{1.f, 1.f, 1.f};
  IntensityUnit unit = IntensityUnit::raw_cbf_ml_per_100g_min;
  std::vector<float> data;

  static Volume zeros(std::array<int, 3> shape,
                      std::array<float, 3> voxel_size_mm = {1.f, 1.f, 1.f},
                      IntensityUnit unit = IntensityUnit::raw_cbf_ml_per_100g_min);

  std::size_t size() const {
    return static_cast<std::size_t>(shape[0]) * shape[1] * shape[2];
  }

  float& at(int i, int j, int k) {
    return data[static_cast<std::size_t>(i) + static_cast<std::size_t>(shape[0]) * (j + static_cast<std::size_t>(shape[1]) * k)];
  }
  float at(int i, int j, int k) const {
    return data[static_cast<std::size_t>(i) + static_cast<std::size_t>(shape[0]) * (j + static_cast<std::size_t>(shape[1]) * k)];
  }

  /// Throws if the shape is non-positive, the buffer length disagrees with
  /// the shape, values are non-finite, or a normalized volume leaves [0,1].
  void validate() const;
};

/// Clip to [0, 100] and divide by 100. Input must be in raw CBF units.
Volume normalize_cbf(const Volume& v);

/// Tight axis-aligned bounding box of all voxels strictly above threshold.
Volume crop_bounding_box(const Volume& v, float threshold);

/// Resample to the target shape with trilinear interpolation, align-corners
/// convention: source coord = t*(S-1)/(T-1); a length-1 target axis maps to
/// the source center.
Volume resample_trilinear(const Volume& v, std::array<int, 3> target);

}  // namespace ichor
