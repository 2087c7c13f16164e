// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstring>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include <json.hpp>

#include "ichor/errors.hpp"
#include "ichor/hash.hpp"
#include "ichor/model.hpp"

namespace ichor {

inline constexpr int kCheckpointVersion = 1;

template <class T>
const char* dtype_name() = delete;
template <>
inline const char* dtype_name<float>() {
  return "f32";
}
template <>
inline const char* dtype_name<double>() {
  return "f64";
}

struct RawTensorView {
  std::string name;
  std::string dtype;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  const unsigned char* data = nullptr;
  std::uint64_t byte_len = 0;
};

/// Writes magic, little-endian header length, JSON manifest (meta plus the
/// tensor directory) and the raw payload. Tensors land in the payload sorted
/// by name with ascending, densely packed offsets.
void write_checkpoint_file(const std::filesystem::path& path, nlohmann::json meta,
                           std::vector<RawTensorView> tensors);

struct LoadedTensor {
  std::string dtype;
  std::int64_t rows = 0;
  std::int64_t cols = 0;
  std::vector<unsigned char> bytes;
};

struct CheckpointFile {
  nlohmann::json meta;
  std::map<std::string, LoadedTensor> tensors;
};

CheckpointFile load_checkpoint(const std::filesystem::path& path);

template <class T>
void save_checkpoint(const std::filesystem::path& path, nlohmann::json meta,
                     const std::vector<ParamRef<T>>& params) {
  std::vector<RawTensorView> raw;
  raw.reserve(params.size());
  for (const auto& p : params) {
    RawTensorView t;
    t.name = p.name;
    t.dtype = dtype_name<T>();
    t.rows = p.tensor->rows();
    t.cols = p.tensor->cols();
    t.data = reinterpret_cast<const unsigned char*>(p.tensor->data());
    t.byte_len = static_cast<std::uint64_t>(t.rows) * t.cols * sizeof(T);
    raw.push_back(std::move(t));
  }
  write_checkpoint_file(path, std::move(meta), std::move(raw));
}

/// Copies every listed parameter out of the file; names, dtypes, and shapes
/// must match exactly, and the file must not contain unused tensors.
template <class T>
void assign_params(const CheckpointFile& file, const std::vector<ParamRef<T>>& params) {
  std::string missing;
  std::size_t used = 0;
  for (const auto& p : params) {
    auto it = file.tensors.find(p.name);
    if (it == file.tensors.end()) {
      missing += missing.empty() ? p.name : ", " + p.name;
      continue;
    }
    const LoadedTensor& t = it->second;
    if (t.dtype != dtype_name<T>())
      throw DataError("tensor " + p.name + " has dtype " + t.dtype + ", expected " +
                      dtype_name<T>());
    if (t.rows != p.tensor->rows() || t.cols != p.tensor->cols())
      throw ShapeError("tensor " + p.name + " is " + std::to_string(t.rows) + "x" +
                       std::to_string(t.cols) + ", expected " + std::to_string(p.tensor->rows()) +
                       "x" + std::to_string(p.tensor->cols()));
    std::memcpy(p.tensor->data(), t.bytes.data(), t.bytes.size());
    ++used;
  }
  if (!missing.empty()) throw DataError("checkpoint is missing tensors: " + missing);
  if (used != file.tensors.size()) {
    std::string extra;
    for (const auto& [name, t] : file.tensors) {
      bool found = false;
      for (const auto& p : params) found = found || p.name == name;
      if (!found) extra += extra.empty() ? name : ", " + name;
    }
    throw DataError("checkpoint holds unexpected tensors: " + extra);
  }
}

/// FNV-1a over names and raw tensor bytes in list order; used to verify that
/// frozen weights stay untouched.
template <class T>
std::string hash_params(const std::vector<ParamRef<T>>& params) {
  std::uint64_t h = 14695981039346656037ULL;
  for (const auto& p : params) {
    h = fnv1a_bytes(reinterpret_cast<const unsigned char*>(p.name.data()), p.name.size(), h);
    h = fnv1a_bytes(reinterpret_cast<const unsigned char*>(p.tensor->data()),
                    static_cast<std::size_t>(p.tensor->size()) * sizeof(T), h);
  }
  return hex64(h);
}

}  // namespace ichor
