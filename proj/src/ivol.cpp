// SPDX-License-Identifier: Apache-2.0

#include "ichor/ivol.hpp"

#include <cstring>
#include <fstream>
#include <vector>

#include <json.hpp>

#include "ichor/errors.hpp"

namespace ichor {

namespace {

constexpr char kMagic[8] = {'I', 'V', 'O', 'L', '0', '0', '0', '1'};

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

}  // namespace

void write_ivol(const Volume& v, const std::filesystem::path& path) {
  v.validate();
  nlohmann::json header = {
      {"shape", {v.shape[0], v.shape[1], v.shape[2]}},
      {"voxel_size_mm", {v.voxel_size_mm[0], v.voxel_size_mm[1], v.voxel_size_mm[2]}},
      {"intensity_unit", to_string(v.unit)},
  };
  const std::string hs = header.dump();
  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os.write(kMagic, 8);
  put_u64_le(hs.size(), os);
  os.write(hs.data(), static_cast<std::streamsize>(hs.size()));
  static_assert(sizeof(float) == 4);
  os.write(reinterpret_cast<const char*>(v.data.data()),
           static_cast<std::streamsize>(v.data.size() * 4));
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

Volume load_ivol(const std::filesystem::path& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw DataError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> bytes((std::istreambuf_iterator<char>(is)),
                                   std::istreambuf_iterator<char>());
  if (bytes.size() < 16 || std::memcmp(bytes.data(), kMagic, 8) != 0) {
    throw BadMagicError("'" + path.string() + "' is not an IVOL file");
  }
  const std::uint64_t hlen = get_u64_le(bytes.data() + 8);
  if (16 + hlen > bytes.size()) throw HeaderError("IVOL header length exceeds file size");
  nlohmann::json header;
  try {
    header = nlohmann::json::parse(bytes.begin() + 16, bytes.begin() + 16 + static_cast<std::ptrdiff_t>(hlen));
  } catch (const nlohmann::json::exception& e) {
    throw HeaderError(std::string("malformed IVOL header: ") + e.what());
  }
  Volume v;
  try {
    const auto shape = header.at("shape");
    const auto vox = header.at("voxel_size_mm");
    if (shape.size() != 3 || vox.size() != 3) throw HeaderError("IVOL shape/voxel_size_mm must have 3 entries");
    for (int a = 0; a < 3; ++a) {
      v.shape[a] = shape[a].get<int>();
      v.voxel_size_mm[a] = vox[a].get<float>();
    }
    v.unit = intensity_unit_from_string(header.at("intensity_unit").get<std::string>());
  } catch (const nlohmann::json::exception& e) {
    throw HeaderError(std::string("malformed IVOL header: ") + e.what());
  }
  for (int d : v.shape) {
    if (d <= 0) throw HeaderError("IVOL header has non-positive shape");
  }
  const std::size_t want = v.shape[0] * static_cast<std::size_t>(v.shape[1]) * v.shape[2] * 4u;
  const std::size_t have = bytes.size() - 16 - hlen;
  if (have != want) {
    throw PayloadLengthError("IVOL payload is " + std::to_string(have) + " bytes, expected " +
                             std::to_string(want));
  }
  v.data.resize(want / 4);
  std::memcpy(v.data.data(), bytes.data() + 16 + hlen, want);
  v.validate();
  return v;
}

}  // namespace ichor
