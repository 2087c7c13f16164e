// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>

#include "ichor/volume.hpp"

namespace ichor {

enum class PhantomKind {
  pretrain,  // unlabeled
  lesion,    // binary class 0/1; class 1 carries a hypoperfusion blob
  quality,   // regression target derived from the noise level
};

struct PhantomSpec {
  std::array<int, 3> grid{48, 48, 48};
  PhantomKind kind = PhantomKind::pretrain;
  int class_id = 0;  // lesion phantoms only, 0 or 1
  float noise_sigma = 0.f;
  std::array<float, 3> lesion_center{0.f, 0.f, 0.f};  // voxel coordinates
  float lesion_radius = 0.f;
  std::uint64_t seed = 0;
};

struct PhantomResult {
  Volume volume;
  std::optional<float> label_or_score;  // class id or quality score
};

/// Deterministic synthetic CBF-like volume: a smooth ellipsoidal "brain"
/// with a radial perfusion profile in [0.3, 0.8] on a zero background,
/// plus Gaussian noise. Lesion phantoms of class 1 subtract a smooth blob
/// of amplitude 0.25 supported inside lesion_radius; the noise stream does
/// not depend on the class, so class 0/1 pairs with equal seeds differ only
/// inside the lesion support. Quality phantoms score 1/(1+10*noise_sigma).
/// Output is clipped to [0,1] and carries normalized units.
PhantomResult generate_phantom(const PhantomSpec& spec);

}  // namespace ichor
