// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Key-value configuration files mirroring PipelineConfig.
//
//   # comment
//   window_len = 16
//   confidence_threshold = 0.5
//   width = 384
//   height = 384
//   endpoint.recognize = http://127.0.0.1:8101
//
// Keys are the PipelineConfig field names; blank lines and text after '#'
// are ignored. Unknown keys and malformed values are rejected with the line
// number.

#pragma once

#include <charconv>
#include <cstdint>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <type_traits>

#include "mugcat/domain.hpp"
#include "mugcat/error.hpp"

namespace mugcat::config {

inline constexpr const char* kEnvVar = "MUGCAT_CONFIG";

namespace internal {

inline std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

template <typename T>
T parse_number(std::string_view text, const std::string& where) {
  const std::string s(text);
  std::size_t used = 0;
  try {
    if constexpr (std::is_same_v<T, double>) {
      const double v = std::stod(s, &used);
      if (used == s.size()) return v;
    } else if constexpr (std::is_same_v<T, std::uint64_t>) {
      if (!s.empty() && s[0] != '-') {
        const auto v = std::stoull(s, &used, 10);
        if (used == s.size()) return v;
      }
    } else {
      const long long v = std::stoll(s, &used, 10);
      if (used == s.size() && v >= std::numeric_limits<T>::min() && v <= std::numeric_limits<T>::max()) {
        return static_cast<T>(v);
      }
    }
  } catch (const std::exception&) {
  }
  throw Error(ErrorCode::kInvalidValue, where + ": '" + s + "' is not a valid number");
}

}  // namespace internal

inline ConfigDraft parse(std::string_view text) {
  ConfigDraft d;
  std::istringstream in{std::string(text)};
  std::string raw;
  int line_no = 0;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos) line = line.substr(0, hash);
    line = internal::trim(line);
    if (line.empty()) continue;
    const std::string where = "line " + std::to_string(line_no);
    const auto eq = line.find('=');
    if (eq == std::string_view::npos) throw Error(ErrorCode::kInvalidValue, where + ": expected key = value");
    const std::string key(internal::trim(line.substr(0, eq)));
    const std::string_view value = internal::trim(line.substr(eq + 1));
    if (value.empty()) throw Error(ErrorCode::kInvalidValue, where + ": missing value for " + key);

    auto as_int = [&] { return internal::parse_number<int>(value, where); };
    if (key == "window_len") d.window_len = as_int();
    else if (key == "stride") d.stride = as_int();
    else if (key == "confidence_threshold") d.confidence_threshold = internal::parse_number<double>(value, where);
    else if (key == "k") d.k = as_int();
    else if (key == "steps") d.steps = as_int();
    else if (key == "width") d.width = as_int();
    else if (key == "height") d.height = as_int();
    else if (key == "seed") d.seed = internal::parse_number<std::uint64_t>(value, where);
    else if (key == "caption_concurrency") d.caption_concurrency = as_int();
    else if (key == "idle_gap_windows") d.idle_gap_windows = as_int();
    else if (key == "turn_budget_ms") d.turn_budget_ms = as_int();
    else if (key == "stage_deadline_ms") d.stage_deadline_ms = as_int();
    else if (key.rfind("endpoint.", 0) == 0) {
      const auto stage = parse_stage(std::string_view(key).substr(9));
      if (!stage) throw Error(ErrorCode::kInvalidValue, where + ": unknown stage in " + key);
      d.endpoints[*stage] = std::string(value);
    } else {
      throw Error(ErrorCode::kInvalidValue, where + ": unknown key " + key);
    }
  }
  return d;
}

/// Fields set in `overlay` replace those in `base`.
inline ConfigDraft merge(ConfigDraft base, const ConfigDraft& overlay) {
  auto take = [](auto& dst, const auto& src) {
    if (src) dst = src;
  };
  take(base.window_len, overlay.window_len);
  take(base.stride, overlay.stride);
  take(base.confidence_threshold, overlay.confidence_threshold);
  take(base.k, overlay.k);
  take(base.steps, overlay.steps);
  take(base.width, overlay.width);
  take(base.height, overlay.height);
  take(base.seed, overlay.seed);
  take(base.caption_concurrency, overlay.caption_concurrency);
  take(base.idle_gap_windows, overlay.idle_gap_windows);
  take(base.turn_budget_ms, overlay.turn_budget_ms);
  take(base.stage_deadline_ms, overlay.stage_deadline_ms);
  for (const auto& [stage, url] : overlay.endpoints) base.endpoints[stage] = url;
  return base;
}

inline ConfigDraft load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::kIoError, "cannot read config file " + path.string());
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse(text.str());
  } catch (const Error& e) {
    throw Error(e.code(), path.string() + ": " + e.message());
  }
}

/// Explicit path first, then $MUGCAT_CONFIG, else an empty draft.
inline ConfigDraft load_default(const std::optional<std::filesystem::path>& explicit_path = std::nullopt) {
  if (explicit_path) return load(*explicit_path);
  if (const char* env = std::getenv(kEnvVar); env && *env) return load(env);
  return {};
}

inline std::string render(const PipelineConfig& c) {
  char threshold[32];
  const auto end = std::to_chars(threshold, threshold + sizeof threshold, c.confidence_threshold).ptr;
  std::ostringstream out;
  out << "window_len = " << c.window_len << "\n"
      << "stride = " << c.stride << "\n"
      << "confidence_threshold = " << std::string_view(threshold, end - threshold) << "\n"
      << "k = " << c.k << "\n"
      << "steps = " << c.steps << "\n"
      << "width = " << c.resolution.width << "\n"
      << "height = " << c.resolution.height << "\n"
      << "seed = " << c.seed << "\n"
      << "caption_concurrency = " << c.caption_concurrency << "\n"
      << "idle_gap_windows = " << c.idle_gap_windows << "\n"
      << "turn_budget_ms = " << c.turn_budget_ms << "\n"
      << "stage_deadline_ms = " << c.stage_deadline_ms << "\n";
  for (const auto& [stage, url] : c.endpoints) out << "endpoint." << to_string(stage) << " = " << url << "\n";
  return out.str();
}

}  // namespace mugcat::config
