// SPDX-License-Identifier: Apache-2.0

#include "ichor/phantom.hpp"

#include <algorithm>
#include <cmath>

#include "ichor/errors.hpp"
#include "ichor/rng.hpp"

namespace ichor {

namespace {

constexpr float kLesionAmplitude = 0.25f;

// Smooth compactly supported bump, 1 at the center, 0 at distance >= radius.
float bump(float dist2, float radius) {
  const float r2 = radius * radius;
  if (dist2 >= r2) return 0.f;
  const float t = 1.f - dist2 / r2;
  return t * t;
}

}  // namespace

PhantomResult generate_phantom(const PhantomSpec& spec) {
  for (int d : spec.grid) {
    if (d <= 0) throw ShapeError("phantom grid dims must be positive");
  }
  if (spec.noise_sigma < 0.f) throw DataError("noise_sigma must be >= 0");
  if (spec.kind == PhantomKind::lesion) {
    if (spec.class_id != 0 && spec.class_id != 1) throw DataError("lesion class_id must be 0 or 1");
    if (spec.lesion_radius <= 0.f) throw DataError("lesion_radius must be positive");
    for (int a = 0; a < 3; ++a) {
      if (spec.lesion_center[a] - spec.lesion_radius < 0.f ||
          spec.lesion_center[a] + spec.lesion_radius > static_cast<float>(spec.grid[a] - 1)) {
        throw DataError("lesion extends outside the grid");
      }
    }
  }

  Rng rng(mix64(spec.seed, 0x70686e746dULL));
  // Per-phantom shape variation; drawn before the noise so the stream layout
  // is identical for both classes.
  float semi[3];
  for (int a = 0; a < 3; ++a) {
    semi[a] = static_cast<float>(spec.grid[a]) * (0.40f + 0.06f * (static_cast<float>(rng.uniform()) - 0.5f));
  }

  Volume v = Volume::zeros(spec.grid, {1.f, 1.f, 1.f}, IntensityUnit::normalized_unit_interval);
  const float cx = (spec.grid[0] - 1) / 2.f;
  const float cy = (spec.grid[1] - 1) / 2.f;
  const float cz = (spec.grid[2] - 1) / 2.f;
  for (int k = 0; k < spec.grid[2]; ++k) {
    for (int j = 0; j < spec.grid[1]; ++j) {
      for (int i = 0; i < spec.grid[0]; ++i) {
        const float dx = (i - cx) / semi[0];
        const float dy = (j - cy) / semi[1];
        const float dz = (k - cz) / semi[2];
        const float r2 = dx * dx + dy * dy + dz * dz;
        if (r2 <= 1.f) v.at(i, j, k) = 0.8f - 0.5f * r2;
      }
    }
  }

  if (spec.noise_sigma > 0.f) {
    for (float& x : v.data) {
      x += spec.noise_sigma * static_cast<float>(rng.normal());
    }
  }

  if (spec.kind == PhantomKind::lesion && spec.class_id == 1) {
    for (int k = 0; k < spec.grid[2]; ++k) {
      for (int j = 0; j < spec.grid[1]; ++j) {
        for (int i = 0; i < spec.grid[0]; ++i) {
          const float dx = i - spec.lesion_center[0];
          const float dy = j - spec.lesion_center[1];
          const float dz = k - spec.lesion_center[2];
          v.at(i, j, k) -= kLesionAmplitude * bump(dx * dx + dy * dy + dz * dz, spec.lesion_radius);
        }
      }
    }
  }

  for (float& x : v.data) x = std::clamp(x, 0.f, 1.f);

  PhantomResult result{std::move(v), std::nullopt};
  if (spec.kind == PhantomKind::lesion) {
    result.label_or_score = static_cast<float>(spec.class_id);
  } else if (spec.kind == PhantomKind::quality) {
    result.label_or_score = std::clamp(1.f / (1.f + 10.f * spec.noise_sigma), 0.f, 1.f);
  }
  return result;
}

}  // namespace ichor
