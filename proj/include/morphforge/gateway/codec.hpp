#pragma once

// Wire and file encodings: SYNV float blocks, base64, PNG, SHA-256 keys.

#include <openssl/evp.h>
#include <png.h>

#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cctype>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "morphforge/latent_math.hpp"
#include "morphforge/raster.hpp"

namespace morphforge::codec {

class FormatError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

using Bytes = std::vector<std::uint8_t>;

// ---------------------------------------------------------------------------
// SYNV: "SYNV" | u16 version=1 | u16 reserved | u32 count | u32 dim | f32 LE payload

inline constexpr std::uint16_t kSynvVersion = 1;
inline constexpr std::size_t kSynvHeader = 16;

struct SynvBlock {
  std::uint32_t count{0};
  std::uint32_t dim{0};
  std::vector<float> values;  // row-major, count * dim

  std::vector<double> row(std::size_t i) const {
    return {values.begin() + static_cast<std::ptrdiff_t>(i * dim),
            values.begin() + static_cast<std::ptrdiff_t>((i + 1) * dim)};
  }
};

namespace detail {

inline void put_u16(Bytes& b, std::uint16_t v) {
  b.push_back(static_cast<std::uint8_t>(v));
  b.push_back(static_cast<std::uint8_t>(v >> 8));
}

inline void put_u32(Bytes& b, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) b.push_back(static_cast<std::uint8_t>(v >> s));
}

inline std::uint32_t get_u32(const std::uint8_t* p) {
  return std::uint32_t(p[0]) | std::uint32_t(p[1]) << 8 | std::uint32_t(p[2]) << 16 | std::uint32_t(p[3]) << 24;
}

}  // namespace detail

inline Bytes encode_synv(const SynvBlock& block) {
  if (block.values.size() != static_cast<std::size_t>(block.count) * block.dim) {
    throw FormatError("SYNV payload has " + std::to_string(block.values.size()) + " values, header says " +
                      std::to_string(static_cast<std::size_t>(block.count) * block.dim));
  }
  Bytes out{'S', 'Y', 'N', 'V'};
  detail::put_u16(out, kSynvVersion);
  detail::put_u16(out, 0);
  detail::put_u32(out, block.count);
  detail::put_u32(out, block.dim);
  out.reserve(kSynvHeader + 4 * block.values.size());
  for (float f : block.values) {
    if (!std::isfinite(f)) throw FormatError("SYNV payload contains a non-finite value");
    detail::put_u32(out, std::bit_cast<std::uint32_t>(f));
  }
  return out;
}

inline SynvBlock decode_synv(const Bytes& bytes) {
  if (bytes.size() < kSynvHeader) throw FormatError("SYNV block truncated before header end");
  if (std::memcmp(bytes.data(), "SYNV", 4) != 0) throw FormatError("bad SYNV magic");
  const std::uint16_t version = static_cast<std::uint16_t>(bytes[4] | bytes[5] << 8);
  if (version != kSynvVersion) throw FormatError("unsupported SYNV version " + std::to_string(version));
  SynvBlock b;
  b.count = detail::get_u32(&bytes[8]);
  b.dim = detail::get_u32(&bytes[12]);
  const std::uint64_t n = std::uint64_t(b.count) * b.dim;
  if (bytes.size() - kSynvHeader != 4 * n) {
    throw FormatError("SYNV payload is " + std::to_string(bytes.size() - kSynvHeader) + " bytes, expected " +
                      std::to_string(4 * n));
  }
  b.values.resize(static_cast<std::size_t>(n));
  for (std::size_t i = 0; i < b.values.size(); ++i) {
    b.values[i] = std::bit_cast<float>(detail::get_u32(&bytes[kSynvHeader + 4 * i]));
    if (!std::isfinite(b.values[i])) throw FormatError("SYNV payload contains a non-finite value");
  }
  return b;
}

/// Latents travel as float32; values are rounded on encode.
inline SynvBlock latents_to_synv(const std::vector<LatentVector>& latents) {
  SynvBlock b;
  b.count = static_cast<std::uint32_t>(latents.size());
  b.dim = latents.empty() ? 0u : static_cast<std::uint32_t>(latents.front().dim());
  for (const auto& l : latents) {
    if (l.dim() != b.dim) throw FormatError("latents in one SYNV block must share a dimension");
    for (double v : l.values()) b.values.push_back(static_cast<float>(v));
  }
  return b;
}

inline std::vector<LatentVector> synv_to_latents(const SynvBlock& b) {
  std::vector<LatentVector> out;
  for (std::size_t i = 0; i < b.count; ++i) out.emplace_back(b.row(i));
  return out;
}

// ---------------------------------------------------------------------------
// base64 (standard alphabet, padded)

inline std::string base64_encode(const Bytes& in) {
  std::string out(4 * ((in.size() + 2) / 3), '\0');
  const int n = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), in.data(), static_cast<int>(in.size()));
  out.resize(static_cast<std::size_t>(n));
  return out;
}

inline Bytes base64_decode(std::string_view in) {
  if (in.size() % 4 != 0) throw FormatError("base64 length is not a multiple of 4");
  for (char c : in) {
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '+' || c == '/' || c == '=')) {
      throw FormatError("invalid base64 character");
    }
  }
  Bytes out(in.size() / 4 * 3);
  const int n = EVP_DecodeBlock(out.data(), reinterpret_cast<const unsigned char*>(in.data()), static_cast<int>(in.size()));
  if (n < 0) throw FormatError("invalid base64 input");
  std::size_t pad = 0;
  if (!in.empty() && in.back() == '=') ++pad;
  if (in.size() > 1 && in[in.size() - 2] == '=') ++pad;
  out.resize(static_cast<std::size_t>(n) - pad);
  return out;
}

// ---------------------------------------------------------------------------
// PNG (8-bit gray or RGB)

inline Bytes encode_png(const Raster& r) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  img.width = static_cast<png_uint_32>(r.width());
  img.height = static_cast<png_uint_32>(r.height());
  img.format = r.channels() == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
  png_alloc_size_t size = 0;
  if (!png_image_write_to_memory(&img, nullptr, &size, 0, r.data().data(), 0, nullptr)) {
    throw FormatError(std::string("png encode failed: ") + img.message);
  }
  Bytes out(size);
  if (!png_image_write_to_memory(&img, out.data(), &size, 0, r.data().data(), 0, nullptr)) {
    throw FormatError(std::string("png encode failed: ") + img.message);
  }
  out.resize(size);
  return out;
}

inline Raster decode_png(const Bytes& bytes) {
  png_image img{};
  img.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_memory(&img, bytes.data(), bytes.size())) {
    throw FormatError(std::string("png decode failed: ") + img.message);
  }
  const bool color = (img.format & PNG_FORMAT_FLAG_COLOR) != 0;
  img.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;
  Raster r(static_cast<int>(img.width), static_cast<int>(img.height), color ? 3 : 1);
  const png_color black{0, 0, 0};
  if (!png_image_finish_read(&img, &black, r.data().data(), 0, nullptr)) {
    png_image_free(&img);
    throw FormatError(std::string("png decode failed: ") + img.message);
  }
  return r;
}

// ---------------------------------------------------------------------------
// Files and hashing

inline Bytes read_file(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + p.string());
  return Bytes(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// Writes to a sibling temporary and renames over the target.
inline void write_file_atomic(const std::filesystem::path& p, const void* data, std::size_t size) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  auto tmp = p;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw std::runtime_error("cannot write " + tmp.string());
    out.write(static_cast<const char*>(data), static_cast<std::streamsize>(size));
    if (!out) throw std::runtime_error("short write to " + tmp.string());
  }
  std::filesystem::rename(tmp, p);
}

inline void write_file_atomic(const std::filesystem::path& p, const Bytes& b) { write_file_atomic(p, b.data(), b.size()); }
inline void write_file_atomic(const std::filesystem::path& p, const std::string& s) { write_file_atomic(p, s.data(), s.size()); }

inline Raster read_png_file(const std::filesystem::path& p) { return decode_png(read_file(p)); }
inline void write_png_file(const std::filesystem::path& p, const Raster& r) { write_file_atomic(p, encode_png(r)); }

inline std::string sha256_hex(const void* data, std::size_t size) {
  std::array<unsigned char, EVP_MAX_MD_SIZE> md{};
  unsigned int len = 0;
  if (!EVP_Digest(data, size, md.data(), &len, EVP_sha256(), nullptr)) throw std::runtime_error("sha256 failed");
  static constexpr char hex[] = "0123456789abcdef";
  std::string out;
  for (unsigned i = 0; i < len; ++i) {
    out.push_back(hex[md[i] >> 4]);
    out.push_back(hex[md[i] & 15]);
  }
  return out;
}

inline std::string sha256_hex(std::string_view s) { return sha256_hex(s.data(), s.size()); }

}  // namespace morphforge::codec
