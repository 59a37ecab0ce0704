// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <deque>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <span>
#include <string>
#include <vector>

#include "mugcat/codec.hpp"
#include "mugcat/domain.hpp"
#include "mugcat/error.hpp"
#include "mugcat/png.hpp"

namespace mugcat::ingest {

enum class SourceMode { kFile, kLive };

struct FrameSource {
  FrameSource(std::string id, SourceMode m, double declared_fps) : source_id(std::move(id)), mode(m), fps(declared_fps) {
    detail::require(std::isfinite(fps) && fps > 0, ErrorCode::kInvalidValue, "frame source fps must be > 0");
  }

  std::string source_id;
  SourceMode mode;
  double fps;
};

// ---------------------------------------------------------------------------
// .mclip container
//
//   "MCLP" | version u8 = 1 | width u16 | height u16 | fps u16 | count u32 | RGB8 frames
//
// All integers big-endian.

inline constexpr std::size_t kMclipHeaderSize = 15;

struct FrameStream {
  std::vector<Frame> frames;
  double fps = 0;
};

inline std::vector<std::uint8_t> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::kIoError, "cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

/// Decodes a whole `.mclip` payload into frames with timestamps index·1000/fps.
inline FrameStream decode_mclip(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 4 || !std::equal(bytes.begin(), bytes.begin() + 4, "MCLP")) {
    throw Error(ErrorCode::kBadMagic, "not an .mclip container");
  }
  if (bytes.size() < kMclipHeaderSize) throw Error(ErrorCode::kTruncatedPayload, ".mclip header is truncated");
  if (bytes[4] != 1) throw Error(ErrorCode::kBadMagic, "unsupported .mclip version " + std::to_string(bytes[4]));
  auto u16 = [&](std::size_t at) { return static_cast<int>((bytes[at] << 8) | bytes[at + 1]); };
  const int width = u16(5);
  const int height = u16(7);
  const int fps = u16(9);
  const std::uint32_t count = (std::uint32_t{bytes[11]} << 24) | (std::uint32_t{bytes[12]} << 16) |
                              (std::uint32_t{bytes[13]} << 8) | bytes[14];
  if (width < kMinFrameSide || height < kMinFrameSide) {
    throw Error(ErrorCode::kDimensionMismatch, "frame size " + std::to_string(width) + "x" + std::to_string(height) +
                                                   " is below 16x16");
  }
  if (fps == 0) throw Error(ErrorCode::kInvalidValue, ".mclip fps must be > 0");
  const std::size_t frame_bytes = static_cast<std::size_t>(width) * height * 3;
  const std::size_t payload = bytes.size() - kMclipHeaderSize;
  if (payload != frame_bytes * count) {
    throw Error(ErrorCode::kTruncatedPayload, "payload holds " + std::to_string(payload) + " bytes, expected " +
                                                  std::to_string(count) + " frames of " + std::to_string(frame_bytes));
  }
  FrameStream out;
  out.fps = fps;
  out.frames.reserve(count);
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto begin = bytes.begin() + static_cast<std::ptrdiff_t>(kMclipHeaderSize + frame_bytes * i);
    out.frames.emplace_back(i, i * 1000.0 / fps, width, height,
                            Bytes(begin, begin + static_cast<std::ptrdiff_t>(frame_bytes)));
  }
  return out;
}

inline Bytes encode_mclip(std::span<const Frame> frames, int fps) {
  detail::require(!frames.empty(), ErrorCode::kInvalidValue, "cannot encode an empty .mclip");
  detail::require(fps > 0 && fps <= 0xffff, ErrorCode::kInvalidValue, ".mclip fps must fit in u16");
  const int w = frames.front().width();
  const int h = frames.front().height();
  detail::require(w <= 0xffff && h <= 0xffff, ErrorCode::kInvalidValue, "frame too large for .mclip");
  Bytes out{'M', 'C', 'L', 'P', 1};
  auto put16 = [&out](int v) {
    out.push_back(static_cast<std::uint8_t>(v >> 8));
    out.push_back(static_cast<std::uint8_t>(v));
  };
  put16(w);
  put16(h);
  put16(fps);
  const auto n = static_cast<std::uint32_t>(frames.size());
  for (int shift = 24; shift >= 0; shift -= 8) out.push_back(static_cast<std::uint8_t>(n >> shift));
  for (const auto& f : frames) {
    detail::require(f.width() == w && f.height() == h, ErrorCode::kDimensionMismatch, "mixed frame sizes");
    out.insert(out.end(), f.pixels().begin(), f.pixels().end());
  }
  return out;
}

// ---------------------------------------------------------------------------
// Frame directory: meta.json {fps, width, height, count} + frame_%05d.png

inline std::string frame_file_name(std::size_t i) {
  char name[32];
  std::snprintf(name, sizeof name, "frame_%05zu.png", i);
  return name;
}

inline FrameStream load_frame_directory(const std::filesystem::path& dir) {
  const auto meta_bytes = read_file(dir / "meta.json");
  const Json meta = codec::parse(std::string(meta_bytes.begin(), meta_bytes.end()));
  const codec::Reader r(meta);
  const double fps = r.field("fps").number();
  const int width = r.field("width").integer<int>();
  const int height = r.field("height").integer<int>();
  const auto count = r.field("count").integer<std::size_t>();
  detail::require(fps > 0, ErrorCode::kInvalidValue, "meta.json fps must be > 0");
  FrameStream out;
  out.fps = fps;
  for (std::size_t i = 0; i < count; ++i) {
    const auto path = dir / frame_file_name(i);
    if (!std::filesystem::exists(path)) {
      throw Error(ErrorCode::kTruncatedPayload, "meta.json declares " + std::to_string(count) + " frames but " +
                                                    path.filename().string() + " is missing");
    }
    RgbImage img = png::decode(read_file(path));
    if (img.width != width || img.height != height) {
      throw Error(ErrorCode::kDimensionMismatch, path.filename().string() + " is " + std::to_string(img.width) +
                                                     "x" + std::to_string(img.height) + ", meta.json declares " +
                                                     std::to_string(width) + "x" + std::to_string(height));
    }
    out.frames.emplace_back(i, i * 1000.0 / fps, width, height, std::move(img.pixels));
  }
  return out;
}

inline void write_frame_directory(const std::filesystem::path& dir, std::span<const Frame> frames, double fps) {
  detail::require(!frames.empty(), ErrorCode::kInvalidValue, "cannot write an empty frame directory");
  std::filesystem::create_directories(dir);
  const Json meta{{"fps", fps}, {"width", frames.front().width()}, {"height", frames.front().height()},
                  {"count", frames.size()}};
  const auto text = codec::dump(meta);
  write_file(dir / "meta.json", Bytes(text.begin(), text.end()));
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const auto& f = frames[i];
    write_file(dir / frame_file_name(i),
               png::encode(RgbImage{f.width(), f.height(), Bytes(f.pixels().begin(), f.pixels().end())}));
  }
}

inline FrameStream load_frames(const std::filesystem::path& path) {
  if (std::filesystem::is_directory(path)) return load_frame_directory(path);
  return decode_mclip(read_file(path));
}

// ---------------------------------------------------------------------------
// Segmentation

/// Number of full windows in a stream of n frames.
constexpr std::size_t window_count(std::size_t n, std::size_t window_len, std::size_t stride) {
  return n < window_len ? 0 : (n - window_len) / stride + 1;
}

inline void check_window(std::size_t window_len, std::size_t stride) {
  detail::require(window_len >= 1, ErrorCode::kInvalidWindow, "window_len must be >= 1");
  detail::require(stride >= 1 && stride <= window_len, ErrorCode::kInvalidWindow,
                  "stride must satisfy 1 <= stride <= window_len");
}

/// File-mode segmentation: clips of exactly window_len frames at offsets
/// 0, stride, 2·stride, ...; a trailing partial window is dropped.
inline std::vector<Clip> segment(std::span<const Frame> frames, std::size_t window_len, std::size_t stride,
                                 const std::string& source_id, double fps) {
  check_window(window_len, stride);
  std::vector<Clip> clips;
  const std::size_t n = window_count(frames.size(), window_len, stride);
  clips.reserve(n);
  for (std::size_t j = 0; j < n; ++j) {
    const auto first = frames.begin() + static_cast<std::ptrdiff_t>(j * stride);
    std::vector<Frame> window(first, first + static_cast<std::ptrdiff_t>(window_len));
    clips.emplace_back(make_clip_id(source_id, window.front().index()), std::move(window), fps, source_id);
  }
  return clips;
}

/// Live-mode segmentation for one source. Frames are pushed as they arrive;
/// frames not yet covered by a full window stay buffered.
class LiveSegmenter {
 public:
  LiveSegmenter(FrameSource source, std::size_t window_len, std::size_t stride)
      : source_(std::move(source)), window_len_(window_len), stride_(stride) {
    check_window(window_len, stride);
  }

  std::vector<Clip> push(std::span<const Frame> frames) {
    std::vector<Clip> out;
    for (const auto& f : frames) {
      buffer_.push_back(f);
      if (buffer_.size() == window_len_) {
        std::vector<Frame> window(buffer_.begin(), buffer_.end());
        out.emplace_back(make_clip_id(source_.source_id, window.front().index()), std::move(window), source_.fps,
                         source_.source_id);
        buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(stride_));
      }
    }
    return out;
  }

  std::size_t buffered() const noexcept { return buffer_.size(); }
  const FrameSource& source() const noexcept { return source_; }
  void reset() { buffer_.clear(); }

 private:
  FrameSource source_;
  std::size_t window_len_;
  std::size_t stride_;
  std::deque<Frame> buffer_;
};

// ---------------------------------------------------------------------------
// Resize

/// Bilinear resample of a packed RGB8 buffer with half-pixel centers,
/// rounding half up. Equal sizes reproduce the input exactly.
inline RgbImage resize_bilinear(const RgbImage& src, int out_w, int out_h) {
  detail::require(out_w >= 1 && out_h >= 1, ErrorCode::kInvalidValue, "resize target must be positive");
  detail::require(src.pixels.size() == static_cast<std::size_t>(src.width) * src.height * 3, ErrorCode::kInvalidValue,
                  "source buffer does not match its dimensions");
  RgbImage out{out_w, out_h, Bytes(static_cast<std::size_t>(out_w) * out_h * 3)};
  const double sx_scale = static_cast<double>(src.width) / out_w;
  const double sy_scale = static_cast<double>(src.height) / out_h;
  for (int y = 0; y < out_h; ++y) {
    const double sy = std::clamp((y + 0.5) * sy_scale - 0.5, 0.0, static_cast<double>(src.height - 1));
    const int y0 = static_cast<int>(sy);
    const int y1 = std::min(y0 + 1, src.height - 1);
    const double fy = sy - y0;
    for (int x = 0; x < out_w; ++x) {
      const double sx = std::clamp((x + 0.5) * sx_scale - 0.5, 0.0, static_cast<double>(src.width - 1));
      const int x0 = static_cast<int>(sx);
      const int x1 = std::min(x0 + 1, src.width - 1);
      const double fx = sx - x0;
      for (int c = 0; c < 3; ++c) {
        auto at = [&](int px, int py) {
          return static_cast<double>(src.pixels[(static_cast<std::size_t>(py) * src.width + px) * 3 + c]);
        };
        const double top = at(x0, y0) * (1 - fx) + at(x1, y0) * fx;
        const double bottom = at(x0, y1) * (1 - fx) + at(x1, y1) * fx;
        const double v = top * (1 - fy) + bottom * fy;
        out.pixels[(static_cast<std::size_t>(y) * out_w + x) * 3 + c] =
            static_cast<std::uint8_t>(std::clamp(std::floor(v + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

/// Largest centered crop of `src` with the aspect ratio out_w:out_h.
inline RgbImage center_crop(const RgbImage& src, int out_w, int out_h) {
  int crop_w = src.width;
  int crop_h = src.height;
  if (static_cast<long long>(src.width) * out_h > static_cast<long long>(src.height) * out_w) {
    crop_w = static_cast<int>(static_cast<long long>(src.height) * out_w / out_h);
  } else {
    crop_h = static_cast<int>(static_cast<long long>(src.width) * out_h / out_w);
  }
  if (crop_w == src.width && crop_h == src.height) return src;
  const int x0 = (src.width - crop_w) / 2;
  const int y0 = (src.height - crop_h) / 2;
  RgbImage out{crop_w, crop_h, Bytes(static_cast<std::size_t>(crop_w) * crop_h * 3)};
  for (int y = 0; y < crop_h; ++y) {
    const auto row = src.pixels.begin() + static_cast<std::ptrdiff_t>(((y0 + y) * src.width + x0) * 3);
    std::copy(row, row + crop_w * 3, out.pixels.begin() + static_cast<std::ptrdiff_t>(y * crop_w * 3));
  }
  return out;
}

inline Clip resize_for_model(const Clip& clip, int target_w, int target_h) {
  detail::require(target_w >= kMinFrameSide && target_h >= kMinFrameSide, ErrorCode::kInvalidValue,
                  "model input must be at least 16x16");
  if (clip.width() == target_w && clip.height() == target_h) return clip;
  std::vector<Frame> frames;
  frames.reserve(clip.frames().size());
  for (const auto& f : clip.frames()) {
    RgbImage src{f.width(), f.height(), Bytes(f.pixels().begin(), f.pixels().end())};
    RgbImage out = resize_bilinear(center_crop(src, target_w, target_h), target_w, target_h);
    frames.emplace_back(f.index(), f.timestamp_ms(), target_w, target_h, std::move(out.pixels));
  }
  return Clip(clip.clip_id(), std::move(frames), clip.fps(), clip.source_id());
}

}  // namespace mugcat::ingest
