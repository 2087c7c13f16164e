// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "ichor/volume.hpp"

namespace ichor {

/// Read a NIfTI-1 single-file image (.nii, optionally gzip-compressed).
/// Supported datatypes: int16 (4), int32 (8), float32 (16), float64 (64).
/// dim[0] must be 3, or 4 with a single frame. Values are scaled as
/// raw*scl_slope + scl_inter (slope 0 treated as 1); the result carries
/// raw CBF units and voxel sizes from pixdim[1..3]. Both endiannesses are
/// accepted (detected via sizeof_hdr).
Volume load_nifti(const std::filesystem::path& path);

/// Companion writer: minimal little-endian NIfTI-1, float32, slope 1/inter 0.
void write_nifti(const Volume& v, const std::filesystem::path& path);

}  // namespace ichor
