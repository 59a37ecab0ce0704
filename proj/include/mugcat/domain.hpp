// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Value types shared by every stage of the engine. Each type checks its
// invariants in its constructor and is immutable afterwards, so a value that
// exists is a valid value and can be shared freely across threads.

#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mugcat/error.hpp"
#include "mugcat/hash.hpp"

namespace mugcat {

using Bytes = std::vector<std::uint8_t>;

enum class Stage { kRecognize, kSynthesize, kCaption, kEmbed, kImageFeatures };

inline constexpr std::array<Stage, 5> kAllStages{Stage::kRecognize, Stage::kSynthesize, Stage::kCaption,
                                                 Stage::kEmbed, Stage::kImageFeatures};

constexpr std::string_view to_string(Stage stage) {
  switch (stage) {
    case Stage::kRecognize: return "recognize";
    case Stage::kSynthesize: return "synthesize";
    case Stage::kCaption: return "caption";
    case Stage::kEmbed: return "embed";
    case Stage::kImageFeatures: return "image_features";
  }
  return "unknown";
}

inline std::optional<Stage> parse_stage(std::string_view name) {
  for (Stage s : kAllStages) {
    if (to_string(s) == name) return s;
  }
  return std::nullopt;
}

struct Resolution {
  int width = 0;
  int height = 0;

  friend auto operator<=>(const Resolution&, const Resolution&) = default;
};

inline std::string to_string(Resolution r) { return std::to_string(r.width) + "x" + std::to_string(r.height); }

/// Synthesis resolutions, in decreasing execution time.
inline constexpr std::array<Resolution, 7> kAllowedResolutions{{
    {512, 512}, {512, 448}, {448, 448}, {512, 384}, {448, 384}, {512, 320}, {384, 384}}};

constexpr bool is_allowed_resolution(Resolution r) {
  return std::find(kAllowedResolutions.begin(), kAllowedResolutions.end(), r) != kAllowedResolutions.end();
}

inline constexpr int kMinFrameSide = 16;

// ---------------------------------------------------------------------------

class Frame {
 public:
  Frame(std::uint64_t index, double timestamp_ms, int width, int height, Bytes pixels)
      : index_(index), timestamp_ms_(timestamp_ms), width_(width), height_(height) {
    detail::require(width >= kMinFrameSide && height >= kMinFrameSide, ErrorCode::kInvalidValue,
                    "frame must be at least 16x16, got " + std::to_string(width) + "x" + std::to_string(height));
    detail::require(pixels.size() == static_cast<std::size_t>(width) * height * 3, ErrorCode::kTruncatedPayload,
                    "frame pixel byte count " + std::to_string(pixels.size()) + " != width*height*3");
    detail::require(std::isfinite(timestamp_ms) && timestamp_ms >= 0, ErrorCode::kInvalidValue,
                    "frame timestamp must be finite and >= 0");
    pixels_ = std::make_shared<const Bytes>(std::move(pixels));
  }

  std::uint64_t index() const noexcept { return index_; }
  double timestamp_ms() const noexcept { return timestamp_ms_; }
  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  std::span<const std::uint8_t> pixels() const noexcept { return *pixels_; }

  /// Same pixel buffer, new position in a stream.
  Frame reindexed(std::uint64_t index, double timestamp_ms) const {
    Frame f = *this;
    f.index_ = index;
    f.timestamp_ms_ = timestamp_ms;
    return f;
  }

  friend bool operator==(const Frame& a, const Frame& b) {
    return a.index_ == b.index_ && a.timestamp_ms_ == b.timestamp_ms_ && a.width_ == b.width_ &&
           a.height_ == b.height_ && (a.pixels_ == b.pixels_ || *a.pixels_ == *b.pixels_);
  }

 private:
  std::uint64_t index_;
  double timestamp_ms_;
  int width_;
  int height_;
  std::shared_ptr<const Bytes> pixels_;
};

class Clip {
 public:
  Clip(std::string clip_id, std::vector<Frame> frames, double fps, std::string source_id)
      : clip_id_(std::move(clip_id)), frames_(std::move(frames)), fps_(fps), source_id_(std::move(source_id)) {
    detail::require(!clip_id_.empty(), ErrorCode::kInvalidValue, "clip_id must be non-empty");
    detail::require(!frames_.empty(), ErrorCode::kInvalidValue, "clip must hold at least one frame");
    detail::require(std::isfinite(fps_) && fps_ > 0, ErrorCode::kInvalidValue, "clip fps must be > 0");
    for (std::size_t i = 1; i < frames_.size(); ++i) {
      const Frame& prev = frames_[i - 1];
      const Frame& cur = frames_[i];
      detail::require(cur.width() == prev.width() && cur.height() == prev.height(), ErrorCode::kDimensionMismatch,
                      "clip frames differ in size at frame " + std::to_string(i));
      detail::require(cur.index() > prev.index(), ErrorCode::kInvalidValue,
                      "clip frame indices must strictly increase");
      detail::require(cur.timestamp_ms() >= prev.timestamp_ms(), ErrorCode::kInvalidValue,
                      "clip timestamps must not decrease");
    }
  }

  const std::string& clip_id() const noexcept { return clip_id_; }
  const std::vector<Frame>& frames() const noexcept { return frames_; }
  double fps() const noexcept { return fps_; }
  const std::string& source_id() const noexcept { return source_id_; }
  int width() const noexcept { return frames_.front().width(); }
  int height() const noexcept { return frames_.front().height(); }
  const Frame& center_frame() const noexcept { return frames_[frames_.size() / 2]; }

  friend bool operator==(const Clip&, const Clip&) = default;

 private:
  std::string clip_id_;
  std::vector<Frame> frames_;
  double fps_;
  std::string source_id_;
};

inline std::string make_clip_id(std::string_view source_id, std::uint64_t first_frame_index) {
  return std::string(source_id) + ":" + std::to_string(first_frame_index);
}

class GlossPrediction {
 public:
  GlossPrediction(std::string label, double confidence) : label_(std::move(label)), confidence_(confidence) {
    detail::require(!label_.empty(), ErrorCode::kInvalidValue, "gloss label must be non-empty");
    detail::require(confidence_ >= 0.0 && confidence_ <= 1.0, ErrorCode::kInvalidValue,
                    "gloss confidence must lie in [0,1]");
  }

  const std::string& label() const noexcept { return label_; }
  double confidence() const noexcept { return confidence_; }

  friend bool operator==(const GlossPrediction&, const GlossPrediction&) = default;

 private:
  std::string label_;
  double confidence_;
};

class KeywordSequence {
 public:
  KeywordSequence() = default;
  KeywordSequence(std::vector<std::string> keywords, std::vector<std::string> accepted_at)
      : keywords_(std::move(keywords)), accepted_at_(std::move(accepted_at)) {
    detail::require(keywords_.size() == accepted_at_.size(), ErrorCode::kInvalidValue,
                    "every keyword needs exactly one provenance clip id");
    for (const auto& k : keywords_) {
      detail::require(!k.empty(), ErrorCode::kInvalidValue, "keywords must be non-empty");
    }
  }

  const std::vector<std::string>& keywords() const noexcept { return keywords_; }
  const std::vector<std::string>& accepted_at() const noexcept { return accepted_at_; }
  bool empty() const noexcept { return keywords_.empty(); }
  std::size_t size() const noexcept { return keywords_.size(); }

  KeywordSequence appended(std::string keyword, std::string clip_id) const {
    auto k = keywords_;
    auto a = accepted_at_;
    k.push_back(std::move(keyword));
    a.push_back(std::move(clip_id));
    return KeywordSequence(std::move(k), std::move(a));
  }

  friend bool operator==(const KeywordSequence&, const KeywordSequence&) = default;

 private:
  std::vector<std::string> keywords_;
  std::vector<std::string> accepted_at_;
};

inline constexpr int kDefaultSteps = 20;
inline constexpr int kDefaultK = 8;
inline constexpr Resolution kDefaultResolution{512, 512};

class SynthesisRequest {
 public:
  SynthesisRequest(std::string prompt, int steps, Resolution resolution, int k, std::uint64_t seed)
      : prompt_(std::move(prompt)), steps_(steps), resolution_(resolution), k_(k), seed_(seed) {
    detail::require(!prompt_.empty(), ErrorCode::kInvalidValue, "synthesis prompt must be non-empty");
    detail::require(steps_ >= 1 && steps_ <= 200, ErrorCode::kInvalidValue, "steps must lie in [1, 200]");
    detail::require(is_allowed_resolution(resolution_), ErrorCode::kInvalidResolution,
                    to_string(resolution_) + " is not an allowed synthesis resolution");
    detail::require(k_ >= 1, ErrorCode::kInvalidValue, "candidate count k must be >= 1");
  }

  const std::string& prompt() const noexcept { return prompt_; }
  int steps() const noexcept { return steps_; }
  Resolution resolution() const noexcept { return resolution_; }
  int width() const noexcept { return resolution_.width; }
  int height() const noexcept { return resolution_.height; }
  int k() const noexcept { return k_; }
  std::uint64_t seed() const noexcept { return seed_; }

  friend bool operator==(const SynthesisRequest&, const SynthesisRequest&) = default;

 private:
  std::string prompt_;
  int steps_;
  Resolution resolution_;
  int k_;
  std::uint64_t seed_;
};

inline std::string hex16(std::uint64_t v) {
  static constexpr char kDigits[] = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = kDigits[v & 0xf];
  return s;
}

inline std::string make_image_id(std::string_view request_id, int ordinal) {
  return std::string(request_id) + "-" + std::to_string(ordinal);
}

class GeneratedImage {
 public:
  GeneratedImage(std::string image_id, std::string request_ref, int ordinal, Bytes png_bytes)
      : image_id_(std::move(image_id)), request_ref_(std::move(request_ref)), ordinal_(ordinal) {
    detail::require(!image_id_.empty(), ErrorCode::kInvalidValue, "image_id must be non-empty");
    detail::require(ordinal_ >= 0, ErrorCode::kInvalidValue, "image ordinal must be >= 0");
    detail::require(!png_bytes.empty(), ErrorCode::kInvalidValue, "image bytes must be non-empty");
    png_ = std::make_shared<const Bytes>(std::move(png_bytes));
  }

  const std::string& image_id() const noexcept { return image_id_; }
  const std::string& request_ref() const noexcept { return request_ref_; }
  int ordinal() const noexcept { return ordinal_; }
  std::span<const std::uint8_t> png_bytes() const noexcept { return *png_; }

  friend bool operator==(const GeneratedImage& a, const GeneratedImage& b) {
    return a.image_id_ == b.image_id_ && a.request_ref_ == b.request_ref_ && a.ordinal_ == b.ordinal_ &&
           (a.png_ == b.png_ || *a.png_ == *b.png_);
  }

 private:
  std::string image_id_;
  std::string request_ref_;
  int ordinal_;
  std::shared_ptr<const Bytes> png_;
};

class Caption {
 public:
  Caption(std::string image_ref, std::string text) : image_ref_(std::move(image_ref)), text_(std::move(text)) {
    detail::require(!image_ref_.empty(), ErrorCode::kInvalidValue, "caption image_ref must be non-empty");
    detail::require(!text_.empty(), ErrorCode::kInvalidValue, "caption text must be non-empty");
  }

  const std::string& image_ref() const noexcept { return image_ref_; }
  const std::string& text() const noexcept { return text_; }

  friend bool operator==(const Caption&, const Caption&) = default;

 private:
  std::string image_ref_;
  std::string text_;
};

class Embedding {
 public:
  explicit Embedding(std::vector<double> vector) : vector_(std::move(vector)) {
    detail::require(!vector_.empty(), ErrorCode::kInvalidValue, "embedding must have dim >= 1");
    for (double v : vector_) {
      detail::require(std::isfinite(v), ErrorCode::kInvalidValue, "embedding components must be finite");
    }
  }

  std::span<const double> vector() const noexcept { return vector_; }
  std::size_t dim() const noexcept { return vector_.size(); }
  bool is_zero() const noexcept {
    return std::all_of(vector_.begin(), vector_.end(), [](double v) { return v == 0.0; });
  }

  Embedding scaled(double alpha) const {
    auto v = vector_;
    for (double& x : v) x *= alpha;
    return Embedding(std::move(v));
  }

  friend bool operator==(const Embedding&, const Embedding&) = default;

 private:
  std::vector<double> vector_;
};

struct CandidatePair {
  CandidatePair(GeneratedImage image_in, Caption caption_in, Embedding caption_embedding_in, double score_in = 0.0)
      : image(std::move(image_in)),
        caption(std::move(caption_in)),
        caption_embedding(std::move(caption_embedding_in)),
        score(score_in) {
    detail::require(caption.image_ref() == image.image_id(), ErrorCode::kInvalidValue,
                    "caption " + caption.image_ref() + " does not describe image " + image.image_id());
  }

  GeneratedImage image;
  Caption caption;
  Embedding caption_embedding;
  double score;

  friend bool operator==(const CandidatePair&, const CandidatePair&) = default;
};

class SelectionResult {
 public:
  SelectionResult(std::size_t selected_index, std::string selected_image, std::string selected_caption,
                  std::vector<double> scores)
      : selected_index_(selected_index),
        selected_image_(std::move(selected_image)),
        selected_caption_(std::move(selected_caption)),
        scores_(std::move(scores)) {
    detail::require(selected_index_ < scores_.size(), ErrorCode::kIndexOutOfRange,
                    "selected_index outside the candidate range");
    for (double s : scores_) {
      detail::require(s >= -1.0 && s <= 1.0, ErrorCode::kInvalidValue, "scores must lie in [-1, 1]");
    }
    const auto first_max = std::max_element(scores_.begin(), scores_.end());
    detail::require(static_cast<std::size_t>(first_max - scores_.begin()) == selected_index_,
                    ErrorCode::kInvalidValue, "selected_index must be the smallest index of the maximum score");
  }

  std::size_t selected_index() const noexcept { return selected_index_; }
  const std::string& selected_image() const noexcept { return selected_image_; }
  const std::string& selected_caption() const noexcept { return selected_caption_; }
  const std::vector<double>& scores() const noexcept { return scores_; }

  friend bool operator==(const SelectionResult&, const SelectionResult&) = default;

 private:
  std::size_t selected_index_;
  std::string selected_image_;
  std::string selected_caption_;
  std::vector<double> scores_;
};

/// Stage names recorded in ConversationTurn::stage_timings_ms.
inline constexpr std::array<std::string_view, 5> kTimedStages{"recognize", "synthesize", "caption", "embed",
                                                              "select"};

using StageTimings = std::map<std::string, double>;

class ConversationTurn {
 public:
  ConversationTurn(std::uint64_t turn_id, KeywordSequence keywords, std::string query_text,
                   Embedding query_embedding, SynthesisRequest request, std::vector<CandidatePair> candidates,
                   SelectionResult selection, StageTimings stage_timings_ms,
                   std::optional<std::size_t> override_index = std::nullopt)
      : turn_id_(turn_id),
        keywords_(std::move(keywords)),
        query_text_(std::move(query_text)),
        query_embedding_(std::move(query_embedding)),
        request_(std::move(request)),
        candidates_(std::move(candidates)),
        selection_(std::move(selection)),
        stage_timings_ms_(std::move(stage_timings_ms)),
        override_(override_index) {
    detail::require(!keywords_.empty(), ErrorCode::kInvalidValue, "turn keywords must be non-empty");
    detail::require(candidates_.size() == static_cast<std::size_t>(request_.k()), ErrorCode::kInvalidValue,
                    "turn must hold exactly k candidates");
    detail::require(selection_.scores().size() == candidates_.size(), ErrorCode::kInvalidValue,
                    "selection must score every candidate");
    detail::require(candidates_[selection_.selected_index()].image.image_id() == selection_.selected_image(),
                    ErrorCode::kInvalidValue, "selected_image does not match the selected candidate");
    for (auto stage : kTimedStages) {
      const auto it = stage_timings_ms_.find(std::string(stage));
      detail::require(it != stage_timings_ms_.end() && it->second >= 0.0, ErrorCode::kInvalidValue,
                      "turn needs a non-negative timing for stage " + std::string(stage));
    }
    if (override_) {
      detail::require(*override_ < candidates_.size(), ErrorCode::kIndexOutOfRange,
                      "override index " + std::to_string(*override_) + " outside [0, k)");
    }
  }

  std::uint64_t turn_id() const noexcept { return turn_id_; }
  const KeywordSequence& keywords() const noexcept { return keywords_; }
  const std::string& query_text() const noexcept { return query_text_; }
  const Embedding& query_embedding() const noexcept { return query_embedding_; }
  const SynthesisRequest& request() const noexcept { return request_; }
  const std::vector<CandidatePair>& candidates() const noexcept { return candidates_; }
  const SelectionResult& selection() const noexcept { return selection_; }
  const StageTimings& stage_timings_ms() const noexcept { return stage_timings_ms_; }
  std::optional<std::size_t> override_index() const noexcept { return override_; }

  /// Records a human choice next to, not instead of, the model's selection.
  ConversationTurn with_override(std::size_t index) const {
    return ConversationTurn(turn_id_, keywords_, query_text_, query_embedding_, request_, candidates_, selection_,
                            stage_timings_ms_, index);
  }

  ConversationTurn with_timings(StageTimings timings) const {
    return ConversationTurn(turn_id_, keywords_, query_text_, query_embedding_, request_, candidates_, selection_,
                            std::move(timings), override_);
  }

  friend bool operator==(const ConversationTurn&, const ConversationTurn&) = default;

 private:
  std::uint64_t turn_id_;
  KeywordSequence keywords_;
  std::string query_text_;
  Embedding query_embedding_;
  SynthesisRequest request_;
  std::vector<CandidatePair> candidates_;
  SelectionResult selection_;
  StageTimings stage_timings_ms_;
  std::optional<std::size_t> override_;
};

inline StageTimings zero_timings() {
  StageTimings t;
  for (auto s : kTimedStages) t[std::string(s)] = 0.0;
  return t;
}

// ---------------------------------------------------------------------------
// Pipeline configuration

/// Unvalidated configuration as read from a file, the CLI or the REST API.
/// Unset fields take their defaults in validate().
struct ConfigDraft {
  std::optional<int> window_len;
  std::optional<int> stride;
  std::optional<double> confidence_threshold;
  std::optional<int> k;
  std::optional<int> steps;
  std::optional<int> width;
  std::optional<int> height;
  std::optional<std::uint64_t> seed;
  std::optional<int> caption_concurrency;
  std::optional<int> idle_gap_windows;
  std::optional<int> turn_budget_ms;
  std::optional<int> stage_deadline_ms;
  std::map<Stage, std::string> endpoints;
};

struct PipelineConfig {
  int window_len = 64;
  int stride = 32;
  double confidence_threshold = 0.5;
  int k = kDefaultK;
  int steps = kDefaultSteps;
  Resolution resolution = kDefaultResolution;
  std::uint64_t seed = 0;
  int caption_concurrency = kDefaultK;  // C; defaults to k
  int idle_gap_windows = 3;             // G
  int turn_budget_ms = 120000;
  int stage_deadline_ms = 60000;
  std::map<Stage, std::string> endpoints;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

inline PipelineConfig validate(const ConfigDraft& draft) {
  PipelineConfig c;
  c.window_len = draft.window_len.value_or(c.window_len);
  c.stride = draft.stride.value_or(c.stride);
  c.confidence_threshold = draft.confidence_threshold.value_or(c.confidence_threshold);
  c.k = draft.k.value_or(c.k);
  c.steps = draft.steps.value_or(c.steps);
  c.resolution = {draft.width.value_or(c.resolution.width), draft.height.value_or(c.resolution.height)};
  c.seed = draft.seed.value_or(c.seed);
  c.caption_concurrency = draft.caption_concurrency.value_or(c.k);
  c.idle_gap_windows = draft.idle_gap_windows.value_or(c.idle_gap_windows);
  c.turn_budget_ms = draft.turn_budget_ms.value_or(c.turn_budget_ms);
  c.stage_deadline_ms = draft.stage_deadline_ms.value_or(c.stage_deadline_ms);
  c.endpoints = draft.endpoints;

  detail::require(c.window_len >= 1, ErrorCode::kInvalidWindow, "window_len must be >= 1");
  detail::require(c.stride >= 1 && c.stride <= c.window_len, ErrorCode::kInvalidWindow,
                  "stride must satisfy 1 <= stride <= window_len");
  detail::require(c.confidence_threshold >= 0.0 && c.confidence_threshold <= 1.0, ErrorCode::kInvalidThreshold,
                  "confidence_threshold must lie in [0, 1]");
  detail::require(is_allowed_resolution(c.resolution), ErrorCode::kInvalidResolution,
                  to_string(c.resolution) + " is not an allowed synthesis resolution");
  detail::require(c.k >= 1, ErrorCode::kInvalidValue, "k must be >= 1");
  detail::require(c.steps >= 1 && c.steps <= 200, ErrorCode::kInvalidValue, "steps must lie in [1, 200]");
  detail::require(c.caption_concurrency >= 1, ErrorCode::kInvalidValue, "caption_concurrency must be >= 1");
  detail::require(c.idle_gap_windows >= 1, ErrorCode::kInvalidValue, "idle_gap_windows must be >= 1");
  detail::require(c.turn_budget_ms >= 1 && c.stage_deadline_ms >= 1, ErrorCode::kInvalidValue,
                  "time budgets must be >= 1 ms");
  return c;
}

inline ConfigDraft to_draft(const PipelineConfig& c) {
  ConfigDraft d;
  d.window_len = c.window_len;
  d.stride = c.stride;
  d.confidence_threshold = c.confidence_threshold;
  d.k = c.k;
  d.steps = c.steps;
  d.width = c.resolution.width;
  d.height = c.resolution.height;
  d.seed = c.seed;
  d.caption_concurrency = c.caption_concurrency;
  d.idle_gap_windows = c.idle_gap_windows;
  d.turn_budget_ms = c.turn_budget_ms;
  d.stage_deadline_ms = c.stage_deadline_ms;
  d.endpoints = c.endpoints;
  return d;
}

}  // namespace mugcat
