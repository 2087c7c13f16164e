// SPDX-License-Identifier: Apache-2.0

#include "ichor/nifti.hpp"

#include <zlib.h>

#include <cmath>
#include <cstring>
#include <fstream>
#include <vector>

#include "ichor/errors.hpp"

namespace ichor {

namespace {

// NIfTI-1 header field offsets (byte positions in the 348-byte header).
constexpr int kOffSizeofHdr = 0;
constexpr int kOffDim = 40;       // short dim[8]
constexpr int kOffDatatype = 70;  // short
constexpr int kOffBitpix = 72;    // short
constexpr int kOffPixdim = 76;    // float pixdim[8]
constexpr int kOffVoxOffset = 108;
constexpr int kOffSclSlope = 112;
constexpr int kOffSclInter = 116;
constexpr int kOffMagic = 344;  // char magic[4]
constexpr int kHeaderSize = 348;

constexpr std::int16_t kDtInt16 = 4;
constexpr std::int16_t kDtInt32 = 8;
constexpr std::int16_t kDtFloat32 = 16;
constexpr std::int16_t kDtFloat64 = 64;

/// Reads the whole file; zlib's gz layer passes uncompressed files through.
std::vector<unsigned char> read_file_maybe_gz(const std::filesystem::path& path) {
  gzFile f = gzopen(path.string().c_str(), "rb");
  if (!f) throw DataError("cannot open '" + path.string() + "'");
  std::vector<unsigned char> out;
  unsigned char buf[1 << 16];
  int n;
  while ((n = gzread(f, buf, sizeof(buf))) > 0) out.insert(out.end(), buf, buf + n);
  const bool bad = n < 0;
  gzclose(f);
  if (bad) throw DataError("decompression failed for '" + path.string() + "'");
  return out;
}

template <class T>
T load_at(const unsigned char* base, int offset, bool swap) {
  T v;
  std::memcpy(&v, base + offset, sizeof(T));
  if (swap) {
    unsigned char* p = reinterpret_cast<unsigned char*>(&v);
    for (std::size_t i = 0; i < sizeof(T) / 2; ++i) std::swap(p[i], p[sizeof(T) - 1 - i]);
  }
  return v;
}

template <class T>
void store_at(unsigned char* base, int offset, T v) {
  std::memcpy(base + offset, &v, sizeof(T));
}

template <class Raw>
void decode_payload(const unsigned char* src, std::size_t n, bool swap, float slope,
                    float inter, std::vector<float>& out) {
  out.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    Raw r;
    std::memcpy(&r, src + i * sizeof(Raw), sizeof(Raw));
    if (swap) {
      unsigned char* p = reinterpret_cast<unsigned char*>(&r);
      for (std::size_t b = 0; b < sizeof(Raw) / 2; ++b) std::swap(p[b], p[sizeof(Raw) - 1 - b]);
    }
    out[i] = static_cast<float>(static_cast<double>(r) * slope + inter);
  }
}

}  // namespace

Volume load_nifti(const std::filesystem::path& path) {
  const std::vector<unsigned char> bytes = read_file_maybe_gz(path);
  if (bytes.size() < kHeaderSize) throw HeaderError("'" + path.string() + "' is shorter than a NIfTI-1 header");
  const unsigned char* h = bytes.data();

  bool swap = false;
  std::int32_t sizeof_hdr = load_at<std::int32_t>(h, kOffSizeofHdr, false);
  if (sizeof_hdr != kHeaderSize) {
    sizeof_hdr = load_at<std::int32_t>(h, kOffSizeofHdr, true);
    if (sizeof_hdr != kHeaderSize) throw HeaderError("sizeof_hdr is not 348 in either byte order");
    swap = true;
  }

  char magic[4];
  std::memcpy(magic, h + kOffMagic, 4);
  if (std::memcmp(magic, "n+1\0", 4) != 0) {
    throw BadMagicError("bad NIfTI magic in '" + path.string() + "' (expected \"n+1\")");
  }

  std::int16_t dim[8];
  for (int i = 0; i < 8; ++i) dim[i] = load_at<std::int16_t>(h, kOffDim + 2 * i, swap);
  if (dim[0] != 3 && dim[0] != 4) {
    throw DimError("dim[0] = " + std::to_string(dim[0]) + ", only 3D (or single-frame 4D) images are supported");
  }
  if (dim[0] == 4 && dim[4] != 1) {
    throw DimError("4D image has dim[4] = " + std::to_string(dim[4]) + ", only single-frame 4D is supported");
  }
  for (int i = 1; i <= 3; ++i) {
    if (dim[i] <= 0) throw DimError("dim[" + std::to_string(i) + "] = " + std::to_string(dim[i]));
  }

  const std::int16_t datatype = load_at<std::int16_t>(h, kOffDatatype, swap);
  std::size_t elem_size;
  switch (datatype) {
    case kDtInt16: elem_size = 2; break;
    case kDtInt32: elem_size = 4; break;
    case kDtFloat32: elem_size = 4; break;
    case kDtFloat64: elem_size = 8; break;
    default:
      throw UnsupportedDatatypeError("NIfTI datatype code " + std::to_string(datatype) + " is not supported");
  }

  float slope = load_at<float>(h, kOffSclSlope, swap);
  const float inter = load_at<float>(h, kOffSclInter, swap);
  if (slope == 0.f) slope = 1.f;
  const float vox_offset = load_at<float>(h, kOffVoxOffset, swap);
  if (!(vox_offset >= kHeaderSize)) throw HeaderError("vox_offset must be >= 348");
  const std::size_t offset = static_cast<std::size_t>(vox_offset);

  Volume v;
  v.shape = {dim[1], dim[2], dim[3]};
  for (int a = 0; a < 3; ++a) {
    float p = load_at<float>(h, kOffPixdim + 4 * (a + 1), swap);
    v.voxel_size_mm[a] = p > 0.f ? p : 1.f;
  }
  v.unit = IntensityUnit::raw_cbf_ml_per_100g_min;

  const std::size_t n = v.size();
  if (offset + n * elem_size > bytes.size()) {
    throw PayloadLengthError("NIfTI payload truncated: need " + std::to_string(n * elem_size) +
                             " bytes at offset " + std::to_string(offset));
  }
  const unsigned char* src = bytes.data() + offset;
  switch (datatype) {
    case kDtInt16: decode_payload<std::int16_t>(src, n, swap, slope, inter, v.data); break;
    case kDtInt32: decode_payload<std::int32_t>(src, n, swap, slope, inter, v.data); break;
    case kDtFloat32: decode_payload<float>(src, n, swap, slope, inter, v.data); break;
    case kDtFloat64: decode_payload<double>(src, n, swap, slope, inter, v.data); break;
    default: break;
  }
  for (float x : v.data) {
    if (!std::isfinite(x)) throw NonFiniteDataError("non-finite value after slope/intercept scaling");
  }
  return v;
}

void write_nifti(const Volume& v, const std::filesystem::path& path) {
  v.validate();
  unsigned char h[kHeaderSize + 4] = {};  // header + 4-byte extension pad
  store_at<std::int32_t>(h, kOffSizeofHdr, kHeaderSize);
  std::int16_t dim[8] = {3, static_cast<std::int16_t>(v.shape[0]), static_cast<std::int16_t>(v.shape[1]),
                         static_cast<std::int16_t>(v.shape[2]), 1, 1, 1, 1};
  for (int i = 0; i < 8; ++i) store_at<std::int16_t>(h, kOffDim + 2 * i, dim[i]);
  store_at<std::int16_t>(h, kOffDatatype, kDtFloat32);
  store_at<std::int16_t>(h, kOffBitpix, 32);
  float pixdim[8] = {1.f, v.voxel_size_mm[0], v.voxel_size_mm[1], v.voxel_size_mm[2], 1.f, 1.f, 1.f, 1.f};
  for (int i = 0; i < 8; ++i) store_at<float>(h, kOffPixdim + 4 * i, pixdim[i]);
  store_at<float>(h, kOffVoxOffset, 352.f);
  store_at<float>(h, kOffSclSlope, 1.f);
  store_at<float>(h, kOffSclInter, 0.f);
  std::memcpy(h + kOffMagic, "n+1\0", 4);

  std::ofstream os(path, std::ios::binary);
  if (!os) throw DataError("cannot open '" + path.string() + "' for writing");
  os.write(reinterpret_cast<const char*>(h), sizeof(h));
  os.write(reinterpret_cast<const char*>(v.data.data()),
           static_cast<std::streamsize>(v.data.size() * sizeof(float)));
  if (!os) throw DataError("write failed for '" + path.string() + "'");
}

}  // namespace ichor
