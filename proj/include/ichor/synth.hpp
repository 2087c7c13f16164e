// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <filesystem>

#include "ichor/dataset.hpp"
#include "ichor/phantom.hpp"

namespace ichor {

struct SynthConfig {
  int n = 0;
  PhantomKind kind = PhantomKind::pretrain;
  std::array<int, 3> grid{48, 48, 48};
  float noise = 0.05f;  // noise sigma; quality phantoms ramp from ~0 up to this
  std::uint64_t seed = 42;
};

/// Deterministic in-memory phantom dataset. Lesion datasets alternate
/// classes (exactly n/2 each for even n) with a randomly placed lesion;
/// quality datasets ramp the noise level so scores spread over a range.
Dataset make_synth_dataset(const SynthConfig& sc);

/// Same dataset materialized as IVOL files plus a JSON-lines manifest in
/// out_dir; returns the manifest path.
std::filesystem::path write_synth_dataset(const SynthConfig& sc,
                                          const std::filesystem::path& out_dir);

}  // namespace ichor
