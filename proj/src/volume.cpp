// SPDX-License-Identifier: Apache-2.0

#include "ichor/volume.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "ichor/errors.hpp"

namespace ichor {

std::string to_string(IntensityUnit unit) {
  switch (unit) {
    case IntensityUnit::raw_cbf_ml_per_100g_min:
      return "raw_cbf_ml_per_100g_min";
    case IntensityUnit::normalized_unit_interval:
      return "normalized_unit_interval";
  }
  throw InternalError("unknown intensity unit");
}

IntensityUnit intensity_unit_from_string(const std::string& s) {
  if (s == "raw_cbf_ml_per_100g_min") return IntensityUnit::raw_cbf_ml_per_100g_min;
  if (s == "normalized_unit_interval") return IntensityUnit::normalized_unit_interval;
  throw HeaderError("unrecognized intensity unit '" + s + "'");
}

Volume Volume::zeros(std::array<int, 3> shape, std::array<float, 3> voxel_size_mm,
                     IntensityUnit unit) {
  Volume v;
  v.shape = shape;
  v.voxel_size_mm = voxel_size_mm;
  v.unit = unit;
  v.data.assign(v.size(), 0.f);
  return v;
}

void Volume::validate() const {
  for (int d : shape) {
    if (d <= 0) throw ShapeError("volume shape must be positive, got (" + std::to_string(shape[0]) + "," + std::to_string(shape[1]) + "," + std::to_string(shape[2]) + ")");
  }
  for (float s : voxel_size_mm) {
    if (!(s > 0.f)) throw HeaderError("voxel size must be positive");
  }
  if (data.size() != size()) {
    throw PayloadLengthError("volume buffer holds " + std::to_string(data.size()) +
                             " values, shape needs " + std::to_string(size()));
  }
  const bool normalized = unit == IntensityUnit::normalized_unit_interval;
  for (float x : data) {
    if (!std::isfinite(x)) throw NonFiniteDataError("volume contains a non-finite value");
    if (normalized && (x < 0.f || x > 1.f)) {
      throw DataError("normalized volume has value " + std::to_string(x) + " outside [0,1]");
    }
  }
}

Volume normalize_cbf(const Volume& v) {
  if (v.unit != IntensityUnit::raw_cbf_ml_per_100g_min) {
    throw UnitError("normalize_cbf expects raw CBF input, volume is already normalized");
  }
  Volume out = v;
  out.unit = IntensityUnit::normalized_unit_interval;
  for (float& x : out.data) x = std::min(std::max(x, 0.f), 100.f) / 100.f;
  return out;
}

Volume crop_bounding_box(const Volume& v, float threshold) {
  if (threshold < 0.f) throw DataError("crop threshold must be >= 0");
  int lo[3] = {v.shape[0], v.shape[1], v.shape[2]};
  int hi[3] = {-1, -1, -1};
  for (int k = 0; k < v.shape[2]; ++k) {
    for (int j = 0; j < v.shape[1]; ++j) {
      for (int i = 0; i < v.shape[0]; ++i) {
        if (v.at(i, j, k) > threshold) {
          lo[0] = std::min(lo[0], i);
          lo[1] = std::min(lo[1], j);
          lo[2] = std::min(lo[2], k);
          hi[0] = std::max(hi[0], i);
          hi[1] = std::max(hi[1], j);
          hi[2] = std::max(hi[2], k);
        }
      }
    }
  }
  if (hi[0] < 0) throw EmptyForegroundError("no voxel above threshold " + std::to_string(threshold));
  Volume out = Volume::zeros({hi[0] - lo[0] + 1, hi[1] - lo[1] + 1, hi[2] - lo[2] + 1},
                             v.voxel_size_mm, v.unit);
  for (int k = 0; k < out.shape[2]; ++k)
    for (int j = 0; j < out.shape[1]; ++j)
      for (int i = 0; i < out.shape[0]; ++i)
        out.at(i, j, k) = v.at(i + lo[0], j + lo[1], k + lo[2]);
  return out;
}

namespace {

// Align-corners source coordinate for target index t.
double source_coord(int t, int src_len, int tgt_len) {
  if (tgt_len == 1) return (src_len - 1) / 2.0;
  return static_cast<double>(t) * (src_len - 1) / (tgt_len - 1);
}

}  // namespace

Volume resample_trilinear(const Volume& v, std::array<int, 3> target) {
  for (int d : target) {
    if (d < 1) throw ShapeError("resample target dims must be >= 1");
  }
  Volume out = Volume::zeros(target, v.voxel_size_mm, v.unit);
  // Voxel size scales with the grid change so physical extent is preserved.
  for (int a = 0; a < 3; ++a) {
    if (target[a] > 1 && v.shape[a] > 1) {
      out.voxel_size_mm[a] = v.voxel_size_mm[a] * static_cast<float>(v.shape[a] - 1) / static_cast<float>(target[a] - 1);
    }
  }
  for (int k = 0; k < target[2]; ++k) {
    const double sz = source_coord(k, v.shape[2], target[2]);
    const int z0 = static_cast<int>(sz);
    const int z1 = std::min(z0 + 1, v.shape[2] - 1);
    const double fz = sz - z0;
    for (int j = 0; j < target[1]; ++j) {
      const double sy = source_coord(j, v.shape[1], target[1]);
      const int y0 = static_cast<int>(sy);
      const int y1 = std::min(y0 + 1, v.shape[1] - 1);
      const double fy = sy - y0;
      for (int i = 0; i < target[0]; ++i) {
        const double sx = source_coord(i, v.shape[0], target[0]);
        const int x0 = static_cast<int>(sx);
        const int x1 = std::min(x0 + 1, v.shape[0] - 1);
        const double fx = sx - x0;
        const double c00 = v.at(x0, y0, z0) * (1 - fx) + v.at(x1, y0, z0) * fx;
        const double c10 = v.at(x0, y1, z0) * (1 - fx) + v.at(x1, y1, z0) * fx;
        const double c01 = v.at(x0, y0, z1) * (1 - fx) + v.at(x1, y0, z1) * fx;
        const double c11 = v.at(x0, y1, z1) * (1 - fx) + v.at(x1, y1, z1) * fx;
        const double c0 = c00 * (1 - fy) + c10 * fy;
        const double c1 = c01 * (1 - fy) + c11 * fy;
        out.at(i, j, k) = static_cast<float>(c0 * (1 - fz) + c1 * fz);
      }
    }
  }
  return out;
}

}  // namespace ichor
