// SPDX-License-Identifier: Apache-2.0

#include "ichor/checkpoint.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <fstream>

namespace ichor {

static_assert(std::endian::native == std::endian::little,
              "checkpoint payloads are written as native little-endian");

namespace {

constexpr char kMagic[8] = {'I', 'C', 'H', 'K', '0', '0', '0', '1'};

void put_u64_le(std::uint64_t v, std::ostream& os) {
  unsigned char b[8];
  for (int i = 0; i < 8; ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  os.write(reinterpret_cast<const char*>(b), 8);
}

std::uint64_t get_u64_le(const unsigned char* b) {
  std::uint64_t v = 0;
  for (int i = 0; i < 8; ++i) v |= static_cast<std::uint64_t>(b[i]) << (8 * i);
  return v;
}

std::size_t dtype_size(const std::string& dtype) {
  if (dtype == "f32") return 4;
  if (dtype == "f64") return 8;
  throw DataError("unknown tensor dtype '" + dtype + "'");
}

}  // namespace

void write_checkpoint_file(const std::filesystem::path& path, nlohmann::json meta,
                           std::vector<RawTensorView> tensors) {
  std::sort(tensors.begin(), tensors.end(),
            [](const RawTensorView& a, const RawTensorView& b) { return a.name < b.name; });
  nlohmann::json dir = nlohmann::json::object();
  std::uint64_t offset = 0;
  for (const auto& t : tensors) {
    if (dir.contains(t.name)) throw InternalError("duplicate tensor name " + t.name);
    dir[t.name] = {{"dtype", t.dtype},
                   {"shape", {t.rows, t.cols}},
                   {"byte_offset", offset},
                   {"byte_len", t.byte_len}};
    offset += t.byte_len;
  }
  meta["format_version"] = kCheckpointVersion;
  meta["tensors"] = std::move(dir);
  const std::string hs = meta.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os.write(kMagic, 8);
  put_u64_le(hs.size(), os);
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  for (const auto& t : tensors)
    os.write(reinterpret_cast<const char*>(t.data), static_cast<std::streamsize>(t.byte_len));
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

CheckpointFile load_checkpoint(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0)
    throw BadMagicError("'" + path.string() + "' is not an ICHK checkpoint");
  const std::uint64_t hlen = get_u64_le(bytes.data() + 8);
  if (16 + hlen > bytes.size()) throw HeaderError("checkpoint header length exceeds file size");

  CheckpointFile file;
  try {
    file.meta = nlohmann::json::parse(bytes.begin() + 16,
                                      bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw HeaderError(std::string("malformed checkpoint manifest: ") + e.what());
  }
  if (!file.meta.contains("format_version") ||
      file.meta["format_version"].get<int>() != kCheckpointVersion)
    throw HeaderError("unsupported checkpoint format version");
  if (!file.meta.contains("tensors") || !file.meta["tensors"].is_object())
    throw HeaderError("checkpoint manifest has no tensor directory");

  const unsigned char* payload = bytes.data() + 16 + hlen;
  const std::uint64_t payload_len = bytes.size() - 16 - hlen;
  std::uint64_t expected_next = 0;
  try {
    for (const auto& [name, entry] : file.meta["tensors"].items()) {
      LoadedTensor t;
      t.dtype = entry.at("dtype").get<std::string>();
      const auto& shape = entry.at("shape");
      if (shape.size() != 2) throw HeaderError("tensor " + name + " shape must have 2 entries");
      t.rows = shape[0].get<std::int64_t>();
      t.cols = shape[1].get<std::int64_t>();
      const std::uint64_t off = entry.at("byte_offset").get<std::uint64_t>();
      const std::uint64_t len = entry.at("byte_len").get<std::uint64_t>();
      if (t.rows < 0 || t.cols < 0 ||
          len != static_cast<std::uint64_t>(t.rows) * t.cols * dtype_size(t.dtype))
        throw HeaderError("tensor " + name + " byte_len disagrees with its shape");
      if (off != expected_next)
        throw HeaderError("tensor " + name + " offset is not ascending and dense");
      if (off + len > payload_len)
        throw PayloadLengthError("tensor " + name + " extends past the payload end");
      expected_next = off + len;
      t.bytes.assign(payload + off, payload + off + len);
      file.tensors.emplace(name, std::move(t));
    }
  } catch (const nlohmann::json::exception& e) {
    throw HeaderError(std::string("malformed tensor directory: ") + e.what());
  }
  if (expected_next != payload_len)
    throw PayloadLengthError("checkpoint payload is " + std::to_string(payload_len) +
                             " bytes, tensor directory covers " + std::to_string(expected_next));
  return file;
}

}  // namespace ichor
