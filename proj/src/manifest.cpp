// SPDX-License-Identifier: Apache-2.0

#include "ichor/manifest.hpp"

#include <cmath>
#include <fstream>

#include <json.hpp>

#include "ichor/errors.hpp"

namespace ichor {

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw DataError("cannot open manifest '" + path.string() + "'");
  const std::filesystem::path base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(is, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json rec;
    try {
      rec = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " + e.what());
    }
    if (!rec.is_object())
      throw DataError("manifest line " + std::to_string(line_no) + " is not a JSON object");
    ManifestEntry e;
    try {
      for (const auto& [key, value] : rec.items()) {
        if (key == "path") {
          e.path = value.get<std::string>();
        } else if (key == "study_id") {
          e.study_id = value.get<std::string>();
        } else if (key == "label") {
          e.label = value.get<int>();
        } else if (key == "score") {
          e.score = value.get<double>();
        } else {
          throw DataError("manifest line " + std::to_string(line_no) + " has unknown key '" +
                          key + "'");
        }
      }
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("manifest line " + std::to_string(line_no) + ": " + ex.what());
    }
    if (e.path.empty())
      throw DataError("manifest line " + std::to_string(line_no) + " is missing 'path'");
    if (e.study_id.empty())
      throw DataError("manifest line " + std::to_string(line_no) + " is missing 'study_id'");
    std::filesystem::path p(e.path);
    if (p.is_relative()) e.path = (base / p).string();
    entries.push_back(std::move(e));
  }
  if (entries.empty()) throw DataError("manifest '" + path.string() + "' has no records");
  return entries;
}

void write_manifest(const std::filesystem::path& path, const std::vector<ManifestEntry>& entries) {
  std::ofstream os(path);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  for (const auto& e : entries) {
    nlohmann::json rec = {{"path", e.path}, {"study_id", e.study_id}};
    if (e.label) rec["label"] = *e.label;
    if (e.score) rec["score"] = *e.score;
    os << rec.dump() << "\n";
  }
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

void validate_manifest(const std::vector<ManifestEntry>& entries, ManifestPurpose purpose) {
  if (entries.empty()) throw DataError("manifest has no records");
  for (std::size_t i = 0; i < entries.size(); ++i) {
    const auto& e = entries[i];
    const std::string where = "manifest record " + std::to_string(i + 1) + " ('" + e.path + "')";
    if (e.label && e.score) throw DataError(where + " carries both a label and a score");
    switch (purpose) {
      case ManifestPurpose::pretrain:
        if (e.label || e.score)
          throw DataError(where + " carries task annotations in a pretraining manifest");
        break;
      case ManifestPurpose::classification:
        if (!e.label) throw DataError(where + " is missing the label");
        if (*e.label != 0 && *e.label != 1)
          throw DataError(where + " has label " + std::to_string(*e.label) + ", expected 0 or 1");
        break;
      case ManifestPurpose::regression:
        if (!e.score) throw DataError(where + " is missing the score");
        if (!std::isfinite(*e.score) || *e.score < 0.0 || *e.score > 1.0)
          throw DataError(where + " has score outside [0,1]");
        break;
    }
  }
}

ManifestPurpose infer_purpose(const std::vector<ManifestEntry>& entries) {
  if (entries.empty()) throw DataError("manifest has no records");
  const bool has_label = entries.front().label.has_value();
  const bool has_score = entries.front().score.has_value();
  ManifestPurpose p = has_label   ? ManifestPurpose::classification
                      : has_score ? ManifestPurpose::regression
                                  : ManifestPurpose::pretrain;
  validate_manifest(entries, p);
  return p;
}

}  // namespace ichor
