// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <numeric>
#include <utility>
#include <vector>

#include "ichor/errors.hpp"
#include "ichor/mat.hpp"
#include "ichor/rng.hpp"
#include "ichor/volume.hpp"

namespace ichor {

/// Partition of a volume into non-overlapping cubic patches. Patch index i
/// maps to grid coordinates (gh, gw, gd) in row-major order, gd fastest.
struct PatchGrid {
  std::array<int, 3> volume_shape{0, 0, 0};
  int patch_size = 0;
  std::array<int, 3> grid{0, 0, 0};
  int n_patches = 0;

  static PatchGrid create(std::array<int, 3> volume_shape, int patch_size) {
    if (patch_size <= 0) throw ShapeError("patch size must be positive");
    for (int d : volume_shape) {
      if (d <= 0 || d % patch_size != 0) {
        throw ShapeError("patch size " + std::to_string(patch_size) +
                         " does not divide volume shape (" + std::to_string(volume_shape[0]) + "," +
                         std::to_string(volume_shape[1]) + "," + std::to_string(volume_shape[2]) + ")");
      }
    }
    PatchGrid g;
    g.volume_shape = volume_shape;
    g.patch_size = patch_size;
    for (int a = 0; a < 3; ++a) g.grid[a] = volume_shape[a] / patch_size;
    g.n_patches = g.grid[0] * g.grid[1] * g.grid[2];
    return g;
  }

  std::array<int, 3> coords_of(int index) const {
    const int gd = index % grid[2];
    const int gw = (index / grid[2]) % grid[1];
    const int gh = index / (grid[2] * grid[1]);
    return {gh, gw, gd};
  }

  int index_of(std::array<int, 3> c) const { return (c[0] * grid[1] + c[1]) * grid[2] + c[2]; }

  int voxels_per_patch() const { return patch_size * patch_size * patch_size; }

  bool operator==(const PatchGrid&) const = default;
};

/// Masked/visible split of the patch indices for a masking ratio rho.
struct MaskPlan {
  int n_patches = 0;
  std::vector<int> masked;   // sorted ascending
  std::vector<int> visible;  // sorted ascending
  double ratio = 0.0;
};

/// |M| = round(rho*N) with ties to even; M is a uniform subset drawn by a
/// partial Fisher-Yates shuffle of 0..N-1.
inline MaskPlan sample_mask(int n_patches, double rho, Rng& rng) {
  if (!(rho >= 0.0 && rho <= 1.0)) throw DataError("masking ratio must lie in [0,1]");
  if (n_patches <= 0) throw ShapeError("mask plan needs at least one patch");
  const int n_masked = static_cast<int>(std::nearbyint(rho * n_patches));
  std::vector<int> perm(n_patches);
  std::iota(perm.begin(), perm.end(), 0);
  for (int i = 0; i < n_masked; ++i) {
    const int j = i + static_cast<int>(rng.below(static_cast<std::uint64_t>(n_patches - i)));
    std::swap(perm[i], perm[j]);
  }
  MaskPlan plan;
  plan.n_patches = n_patches;
  plan.ratio = rho;
  plan.masked.assign(perm.begin(), perm.begin() + n_masked);
  plan.visible.assign(perm.begin() + n_masked, perm.end());
  std::sort(plan.masked.begin(), plan.masked.end());
  std::sort(plan.visible.begin(), plan.visible.end());
  return plan;
}

/// Rows are patches (N x P^3); voxels within a patch in row-major order
/// over the local (di, dj, dk) offsets, dk fastest.
template <class T>
std::pair<Mat<T>, PatchGrid> patchify(const Volume& v, int patch_size) {
  const PatchGrid grid = PatchGrid::create(v.shape, patch_size);
  const int p = patch_size;
  Mat<T> patches(grid.n_patches, grid.voxels_per_patch());
  for (int idx = 0; idx < grid.n_patches; ++idx) {
    const auto c = grid.coords_of(idx);
    T* row = patches.row(idx).data();
    int col = 0;
    for (int di = 0; di < p; ++di)
      for (int dj = 0; dj < p; ++dj)
        for (int dk = 0; dk < p; ++dk)
          row[col++] = static_cast<T>(v.at(c[0] * p + di, c[1] * p + dj, c[2] * p + dk));
  }
  return {std::move(patches), grid};
}

template <class T>
Volume unpatchify(const Mat<T>& patches, const PatchGrid& grid,
                  std::array<float, 3> voxel_size_mm = {1.f, 1.f, 1.f},
                  IntensityUnit unit = IntensityUnit::normalized_unit_interval) {
  if (patches.rows() != grid.n_patches || patches.cols() != grid.voxels_per_patch()) {
    throw ShapeError("patch set is " + std::to_string(patches.rows()) + "x" +
                     std::to_string(patches.cols()) + ", grid expects " +
                     std::to_string(grid.n_patches) + "x" + std::to_string(grid.voxels_per_patch()));
  }
  const int p = grid.patch_size;
  Volume v = Volume::zeros(grid.volume_shape, voxel_size_mm, unit);
  for (int idx = 0; idx < grid.n_patches; ++idx) {
    const auto c = grid.coords_of(idx);
    const T* row = patches.row(idx).data();
    int col = 0;
    for (int di = 0; di < p; ++di)
      for (int dj = 0; dj < p; ++dj)
        for (int dk = 0; dk < p; ++dk)
          v.at(c[0] * p + di, c[1] * p + dj, c[2] * p + dk) = static_cast<float>(row[col++]);
  }
  return v;
}

/// Reconstruction loss of the masked-patch objective: the per-patch squared
/// L2 norms of (pred - target), summed over masked patches and divided by
/// |M|. If grad_pred is given it receives dL/dpred: 2(pred-target)/|M| on
/// masked rows, zero on visible rows.
template <class T>
T masked_mse(const Mat<T>& pred, const Mat<T>& target, const MaskPlan& plan,
             Mat<T>* grad_pred = nullptr) {
  if (pred.rows() != target.rows() || pred.cols() != target.cols()) {
    throw ShapeError("pred/target patch sets differ in shape");
  }
  if (pred.rows() != plan.n_patches) {
    throw ShapeError("patch set row count does not match the mask plan");
  }
  if (plan.masked.empty()) throw UndefinedLossError("masked MSE is undefined for an empty mask");
  const T inv_m = T(1) / static_cast<T>(plan.masked.size());
  if (grad_pred) grad_pred->setZero(pred.rows(), pred.cols());
  T loss = 0;
  for (int i : plan.masked) {
    const auto diff = pred.row(i) - target.row(i);
    loss += diff.squaredNorm();
    if (grad_pred) grad_pred->row(i) = T(2) * inv_m * diff;
  }
  return loss * inv_m;
}

}  // namespace ichor
