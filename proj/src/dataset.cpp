// SPDX-License-Identifier: Apache-2.0

#include "ichor/dataset.hpp"

#include <string>

#include "ichor/errors.hpp"
#include "ichor/ivol.hpp"
#include "ichor/nifti.hpp"

namespace ichor {

namespace {

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

Volume load_volume(const std::filesystem::path& path, const std::string& format) {
  std::string fmt = format;
  if (fmt == "auto") {
    const std::string name = path.filename().string();
    if (ends_with(name, ".ivol")) {
      fmt = "ivol";
    } else if (ends_with(name, ".nii") || ends_with(name, ".nii.gz")) {
      fmt = "nifti";
    } else {
      throw DataError("cannot infer volume format from '" + path.string() + "'");
    }
  }
  if (fmt == "ivol") return load_ivol(path);
  if (fmt == "nifti") return load_nifti(path);
  throw ConfigError("unknown volume format '" + format + "'");
}

Volume preprocess_volume(Volume v) {
  if (v.unit == IntensityUnit::normalized_unit_interval) return v;
  Volume cropped = crop_bounding_box(v, 0.f);
  Volume resampled = resample_trilinear(cropped, kRawTargetShape);
  return normalize_cbf(resampled);
}

Dataset load_dataset(const std::vector<ManifestEntry>& entries, const std::string& format,
                     int patch_size) {
  if (entries.empty()) throw DataError("dataset manifest has no records");
  Dataset ds;
  ds.entries = entries;
  ds.volumes.reserve(entries.size());
  for (const auto& e : entries) {
    try {
      Volume v = preprocess_volume(load_volume(e.path, format));
      v.validate();
      ds.volumes.push_back(std::move(v));
    } catch (const Error& ex) {
      if (std::string(ex.what()).find(e.path) != std::string::npos) throw;
      throw DataError("'" + e.path + "': " + ex.what());
    } catch (const std::exception& ex) {
      throw DataError("'" + e.path + "': " + ex.what());
    }
    const Volume& v = ds.volumes.back();
    if (ds.volumes.size() == 1) {
      ds.shape = v.shape;
      for (int a = 0; a < 3; ++a) {
        if (ds.shape[a] % patch_size != 0)
          throw ShapeError("'" + e.path + "': shape (" + std::to_string(ds.shape[0]) + "," +
                           std::to_string(ds.shape[1]) + "," + std::to_string(ds.shape[2]) +
                           ") is not divisible by patch size " + std::to_string(patch_size));
      }
    } else if (v.shape != ds.shape) {
      throw ShapeError("'" + e.path + "': shape differs from the rest of the dataset");
    }
  }
  return ds;
}

}  // namespace ichor
