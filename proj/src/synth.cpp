// SPDX-License-Identifier: Apache-2.0

#include "ichor/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "ichor/ivol.hpp"
#include "ichor/rng.hpp"

namespace ichor {

namespace {

PhantomSpec spec_for(const SynthConfig& sc, int i) {
  PhantomSpec spec;
  spec.grid = sc.grid;
  spec.kind = sc.kind;
  spec.seed = mix64(sc.seed, static_cast<std::uint64_t>(i));
  if (sc.kind == PhantomKind::quality) {
    spec.noise_sigma =
        sc.noise * (static_cast<float>(i) + 0.5f) / static_cast<float>(std::max(sc.n, 1));
  } else {
    spec.noise_sigma = sc.noise;
  }
  if (sc.kind == PhantomKind::lesion) {
    spec.class_id = i % 2;
    spec.lesion_radius = 0.18f * static_cast<float>(*std::min_element(sc.grid.begin(),
                                                                      sc.grid.end()));
    Rng loc(mix64(sc.seed, static_cast<std::uint64_t>(i), 0x6c6f63ULL));
    for (int a = 0; a < 3; ++a) {
      const float c = static_cast<float>(sc.grid[a] - 1) / 2.f;
      const float jitter = 0.12f * static_cast<float>(sc.grid[a]);
      spec.lesion_center[a] =
          c + jitter * (2.f * static_cast<float>(loc.uniform()) - 1.f);
    }
  }
  return spec;
}

std::string file_name(int i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "vol_%04d.ivol", i);
  return buf;
}

ManifestEntry entry_for(const SynthConfig& sc, int i, const PhantomResult& r) {
  ManifestEntry e;
  e.path = file_name(i);
  e.study_id = "synth";
  if (sc.kind == PhantomKind::lesion)
    e.label = static_cast<int>(std::lround(*r.label_or_score));
  else if (sc.kind == PhantomKind::quality)
    e.score = static_cast<double>(*r.label_or_score);
  return e;
}

}  // namespace

Dataset make_synth_dataset(const SynthConfig& sc) {
  if (sc.n < 1) throw ConfigError("synthetic dataset size must be positive");
  Dataset data;
  data.shape = sc.grid;
  data.entries.reserve(static_cast<std::size_t>(sc.n));
  data.volumes.reserve(static_cast<std::size_t>(sc.n));
  for (int i = 0; i < sc.n; ++i) {
    PhantomResult r = generate_phantom(spec_for(sc, i));
    data.entries.push_back(entry_for(sc, i, r));
    data.volumes.push_back(std::move(r.volume));
  }
  return data;
}

std::filesystem::path write_synth_dataset(const SynthConfig& sc,
                                          const std::filesystem::path& out_dir) {
  if (sc.n < 1) throw ConfigError("synthetic dataset size must be positive");
  std::filesystem::create_directories(out_dir);
  std::vector<ManifestEntry> entries;
  entries.reserve(static_cast<std::size_t>(sc.n));
  for (int i = 0; i < sc.n; ++i) {
    PhantomResult r = generate_phantom(spec_for(sc, i));
    entries.push_back(entry_for(sc, i, r));
    write_ivol(r.volume, out_dir / file_name(i));
  }
  const std::filesystem::path manifest = out_dir / "manifest.jsonl";
  write_manifest(manifest, entries);
  return manifest;
}

}  // namespace ichor
