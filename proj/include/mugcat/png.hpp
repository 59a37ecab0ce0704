// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Minimal PNG codec over zlib. The encoder is fixed (8-bit RGB, filter type 0
// on every row, deflate level 6, one IDAT chunk) so that the same pixels
// always produce the same bytes. The decoder accepts non-interlaced 8-bit
// grayscale, gray+alpha, RGB and RGBA images with any filter types.

#pragma once

#include <zlib.h>

#include <algorithm>
#include <array>
#include <cstdint>
#include <cstdlib>
#include <span>
#include <string>
#include <vector>

#include "mugcat/error.hpp"

namespace mugcat {

/// Packed RGB8 image, row-major.
struct RgbImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;

  friend bool operator==(const RgbImage&, const RgbImage&) = default;
};

namespace png {

namespace detail {

inline constexpr std::array<std::uint8_t, 8> kSignature{0x89, 'P', 'N', 'G', '\r', '\n', 0x1a, '\n'};

inline void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  out.push_back(static_cast<std::uint8_t>(v >> 24));
  out.push_back(static_cast<std::uint8_t>(v >> 16));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
  out.push_back(static_cast<std::uint8_t>(v));
}

inline std::uint32_t get_u32(std::span<const std::uint8_t> b, std::size_t at) {
  return (std::uint32_t{b[at]} << 24) | (std::uint32_t{b[at + 1]} << 16) | (std::uint32_t{b[at + 2]} << 8) |
         std::uint32_t{b[at + 3]};
}

inline void put_chunk(std::vector<std::uint8_t>& out, const char* tag, std::span<const std::uint8_t> data) {
  put_u32(out, static_cast<std::uint32_t>(data.size()));
  const std::size_t start = out.size();
  out.insert(out.end(), tag, tag + 4);
  out.insert(out.end(), data.begin(), data.end());
  const uLong crc = crc32(0L, out.data() + start, static_cast<uInt>(out.size() - start));
  put_u32(out, static_cast<std::uint32_t>(crc));
}

inline int paeth(int a, int b, int c) {
  const int p = a + b - c;
  const int pa = std::abs(p - a);
  const int pb = std::abs(p - b);
  const int pc = std::abs(p - c);
  if (pa <= pb && pa <= pc) return a;
  if (pb <= pc) return b;
  return c;
}

[[noreturn]] inline void fail(const std::string& why) { throw Error(ErrorCode::kDecodeError, "png: " + why); }

}  // namespace detail

struct Header {
  int width = 0;
  int height = 0;
  int bit_depth = 0;
  int color_type = 0;
  int interlace = 0;
};

inline std::vector<std::uint8_t> encode(const RgbImage& image) {
  using detail::put_u32;
  const std::size_t stride = static_cast<std::size_t>(image.width) * 3;
  ::mugcat::detail::require(image.width > 0 && image.height > 0 && image.pixels.size() == stride * image.height,
                  ErrorCode::kInvalidValue, "png: pixel buffer does not match dimensions");

  std::vector<std::uint8_t> raw;
  raw.reserve((stride + 1) * image.height);
  for (int y = 0; y < image.height; ++y) {
    raw.push_back(0);
    const auto row = image.pixels.begin() + static_cast<std::ptrdiff_t>(stride * y);
    raw.insert(raw.end(), row, row + static_cast<std::ptrdiff_t>(stride));
  }
  uLongf packed_size = compressBound(static_cast<uLong>(raw.size()));
  std::vector<std::uint8_t> packed(packed_size);
  if (compress2(packed.data(), &packed_size, raw.data(), static_cast<uLong>(raw.size()), 6) != Z_OK) {
    throw Error(ErrorCode::kInvalidValue, "png: deflate failed");
  }
  packed.resize(packed_size);

  std::vector<std::uint8_t> out(detail::kSignature.begin(), detail::kSignature.end());
  std::vector<std::uint8_t> ihdr;
  put_u32(ihdr, static_cast<std::uint32_t>(image.width));
  put_u32(ihdr, static_cast<std::uint32_t>(image.height));
  ihdr.insert(ihdr.end(), {8, 2, 0, 0, 0});
  detail::put_chunk(out, "IHDR", ihdr);
  detail::put_chunk(out, "IDAT", packed);
  detail::put_chunk(out, "IEND", {});
  return out;
}

/// Parses the signature and IHDR only.
inline Header read_header(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 33 || !std::equal(detail::kSignature.begin(), detail::kSignature.end(), bytes.begin())) {
    detail::fail("bad signature");
  }
  if (detail::get_u32(bytes, 8) != 13 || std::string(bytes.begin() + 12, bytes.begin() + 16) != "IHDR") {
    detail::fail("missing IHDR");
  }
  Header h;
  h.width = static_cast<int>(detail::get_u32(bytes, 16));
  h.height = static_cast<int>(detail::get_u32(bytes, 20));
  h.bit_depth = bytes[24];
  h.color_type = bytes[25];
  h.interlace = bytes[28];
  if (h.width <= 0 || h.height <= 0) detail::fail("zero dimension");
  return h;
}

inline RgbImage decode(std::span<const std::uint8_t> bytes) {
  const Header h = read_header(bytes);
  int channels = 0;
  switch (h.color_type) {
    case 0: channels = 1; break;
    case 2: channels = 3; break;
    case 4: channels = 2; break;
    case 6: channels = 4; break;
    default: detail::fail("unsupported color type " + std::to_string(h.color_type));
  }
  if (h.bit_depth != 8) detail::fail("only 8-bit images are supported");
  if (h.interlace != 0) detail::fail("interlaced images are not supported");

  std::vector<std::uint8_t> idat;
  std::size_t at = 8;
  bool ended = false;
  while (at + 12 <= bytes.size()) {
    const std::uint32_t len = detail::get_u32(bytes, at);
    if (at + 12 + std::size_t{len} > bytes.size()) detail::fail("truncated chunk");
    const std::string tag(bytes.begin() + static_cast<std::ptrdiff_t>(at + 4),
                          bytes.begin() + static_cast<std::ptrdiff_t>(at + 8));
    const uLong crc = crc32(0L, bytes.data() + at + 4, static_cast<uInt>(len + 4));
    if (crc != detail::get_u32(bytes, at + 8 + len)) detail::fail("crc mismatch in " + tag);
    if (tag == "IDAT") idat.insert(idat.end(), bytes.begin() + static_cast<std::ptrdiff_t>(at + 8),
                                   bytes.begin() + static_cast<std::ptrdiff_t>(at + 8 + len));
    at += 12 + len;
    if (tag == "IEND") {
      ended = true;
      break;
    }
  }
  if (!ended) detail::fail("missing IEND");

  const std::size_t stride = static_cast<std::size_t>(h.width) * channels;
  std::vector<std::uint8_t> raw((stride + 1) * h.height);
  uLongf raw_size = static_cast<uLongf>(raw.size());
  if (uncompress(raw.data(), &raw_size, idat.data(), static_cast<uLong>(idat.size())) != Z_OK ||
      raw_size != raw.size()) {
    detail::fail("corrupt image data");
  }

  std::vector<std::uint8_t> plane(stride * h.height);
  for (int y = 0; y < h.height; ++y) {
    const std::uint8_t filter = raw[(stride + 1) * y];
    const std::uint8_t* in = raw.data() + (stride + 1) * y + 1;
    std::uint8_t* cur = plane.data() + stride * y;
    const std::uint8_t* prev = y > 0 ? cur - stride : nullptr;
    for (std::size_t x = 0; x < stride; ++x) {
      const int a = x >= static_cast<std::size_t>(channels) ? cur[x - channels] : 0;
      const int b = prev ? prev[x] : 0;
      const int c = (prev && x >= static_cast<std::size_t>(channels)) ? prev[x - channels] : 0;
      int pred = 0;
      switch (filter) {
        case 0: pred = 0; break;
        case 1: pred = a; break;
        case 2: pred = b; break;
        case 3: pred = (a + b) / 2; break;
        case 4: pred = detail::paeth(a, b, c); break;
        default: detail::fail("bad filter type");
      }
      cur[x] = static_cast<std::uint8_t>(in[x] + pred);
    }
  }

  RgbImage image{h.width, h.height, {}};
  image.pixels.resize(static_cast<std::size_t>(h.width) * h.height * 3);
  const std::size_t count = static_cast<std::size_t>(h.width) * h.height;
  for (std::size_t p = 0; p < count; ++p) {
    const std::uint8_t* src = plane.data() + p * channels;
    std::uint8_t* dst = image.pixels.data() + p * 3;
    if (channels >= 3) {
      dst[0] = src[0];
      dst[1] = src[1];
      dst[2] = src[2];
    } else {
      dst[0] = dst[1] = dst[2] = src[0];
    }
  }
  return image;
}

}  // namespace png
}  // namespace mugcat
