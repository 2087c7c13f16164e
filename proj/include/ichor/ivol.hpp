// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <filesystem>

#include "ichor/volume.hpp"

namespace ichor {

/// IVOL container: 8-byte magic "IVOL0001", u64 little-endian header length,
/// JSON header {shape, voxel_size_mm, intensity_unit}, then H*W*D
/// little-endian float32 values in storage order. Roundtrips bit-exactly.
Volume load_ivol(const std::filesystem::path& path);
void write_ivol(const Volume& v, const std::filesystem::path& path);

}  // namespace ichor
