// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <exception>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <thread>
#include <utility>
#include <variant>
#include <vector>

#include "mugcat/domain.hpp"
#include "mugcat/error.hpp"
#include "mugcat/ingest.hpp"
#include "mugcat/protocol.hpp"
#include "mugcat/selection.hpp"

namespace mugcat::pipeline {

enum class TurnPhase { kCollecting, kSynthesizing, kCaptioning, kSelecting, kDone, kFailed };

constexpr std::string_view to_string(TurnPhase p) {
  switch (p) {
    case TurnPhase::kCollecting: return "collecting";
    case TurnPhase::kSynthesizing: return "synthesizing";
    case TurnPhase::kCaptioning: return "captioning";
    case TurnPhase::kSelecting: return "selecting";
    case TurnPhase::kDone: return "done";
    case TurnPhase::kFailed: return "failed";
  }
  return "unknown";
}

/// Progress of one turn. Phases only move forward, one step at a time, or to
/// failed; timings are recorded only for stages that completed.
class TurnState {
 public:
  explicit TurnState(KeywordSequence keywords) : keywords_(std::move(keywords)) {}

  TurnPhase phase() const noexcept { return phase_; }
  const KeywordSequence& keywords() const noexcept { return keywords_; }
  const StageTimings& timings() const noexcept { return timings_; }

  void advance(TurnPhase next) {
    const bool terminal = phase_ == TurnPhase::kDone || phase_ == TurnPhase::kFailed;
    const bool forward = static_cast<int>(next) == static_cast<int>(phase_) + 1 && next != TurnPhase::kFailed;
    detail::require(!terminal && (forward || next == TurnPhase::kFailed), ErrorCode::kInvalidValue,
                    "illegal turn transition " + std::string(to_string(phase_)) + " -> " + std::string(to_string(next)));
    phase_ = next;
  }

  void record(std::string_view stage, double ms) { timings_[std::string(stage)] = ms; }

 private:
  TurnPhase phase_ = TurnPhase::kCollecting;
  KeywordSequence keywords_;
  StageTimings timings_;
};

/// A turn that did not complete. `stage()` names the failing stage ("" for
/// a timeout between stages); `partial_timings()` holds completed stages.
class TurnFailed : public Error {
 public:
  TurnFailed(ErrorCode code, std::string stage, ErrorCode cause, const std::string& message, StageTimings partial)
      : Error(code, (stage.empty() ? std::string() : stage + ": ") + message),
        stage_(std::move(stage)),
        cause_(cause),
        partial_(std::move(partial)) {}

  const std::string& stage() const noexcept { return stage_; }
  ErrorCode cause() const noexcept { return cause_; }
  const StageTimings& partial_timings() const noexcept { return partial_; }

 private:
  std::string stage_;
  ErrorCode cause_;
  StageTimings partial_;
};

/// Appends the top-1 label when its confidence reaches `threshold` and it
/// differs from the last accepted keyword. Returns the input unchanged
/// otherwise.
inline KeywordSequence accept_gloss(const KeywordSequence& keywords, std::span<const GlossPrediction> ranked,
                                    double threshold, const std::string& clip_id) {
  if (ranked.empty()) return keywords;
  const GlossPrediction& top = ranked.front();
  if (top.confidence() < threshold) return keywords;
  if (!keywords.empty() && keywords.keywords().back() == top.label()) return keywords;
  return keywords.appended(top.label(), clip_id);
}

/// Runs fn(i) for i in [0, n) with at most `limit` calls in flight. Every
/// call runs even if another throws; the lowest-index exception is rethrown.
template <typename Fn>
void parallel_bounded(std::size_t n, std::size_t limit, Fn&& fn) {
  if (n == 0) return;
  const std::size_t workers = std::max<std::size_t>(1, std::min(limit, n));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto work = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (workers == 1) {
    work();
  } else {
    std::vector<std::jthread> pool;
    pool.reserve(workers - 1);
    for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(work);
    work();
  }
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

/// Optional progress callbacks, invoked on the orchestrating thread.
struct TurnObserver {
  std::function<void(std::uint64_t turn_id, const KeywordSequence&, const std::string& query)> turn_started;
  std::function<void(std::uint64_t turn_id, const std::vector<CandidatePair>&)> candidates_ready;
  std::function<void(const ConversationTurn&)> selection_made;
};

/// One conversation turn: synthesize K candidates from the query built out of
/// `keywords`, caption and embed each, and select the closest caption.
inline ConversationTurn run_turn(std::uint64_t turn_id, const KeywordSequence& keywords, const PipelineConfig& config,
                                 const protocol::Backends& backends, double recognize_ms = 0.0,
                                 const TurnObserver& observer = {}) {
  using Clock = std::chrono::steady_clock;
  const auto turn_start = Clock::now();
  const std::string query = selection::build_query(keywords);
  TurnState state(keywords);
  state.record("recognize", recognize_ms);

  auto ms_since = [](Clock::time_point t) {
    return std::chrono::duration<double, std::milli>(Clock::now() - t).count();
  };
  auto fail = [&](std::string stage, const Error& cause) -> TurnFailed {
    state.advance(TurnPhase::kFailed);
    return TurnFailed(ErrorCode::kStageFailed, std::move(stage), cause.code(), cause.message(), state.timings());
  };
  auto check_budget = [&] {
    if (ms_since(turn_start) > config.turn_budget_ms) {
      state.advance(TurnPhase::kFailed);
      throw TurnFailed(ErrorCode::kTurnTimeout, "", ErrorCode::kTurnTimeout,
                       "turn exceeded its " + std::to_string(config.turn_budget_ms) + " ms budget", state.timings());
    }
  };

  if (observer.turn_started) observer.turn_started(turn_id, keywords, query);
  const SynthesisRequest request(query, config.steps, config.resolution, config.k, config.seed);
  const std::size_t k = static_cast<std::size_t>(config.k);
  const std::size_t limit = static_cast<std::size_t>(config.caption_concurrency);

  state.advance(TurnPhase::kSynthesizing);
  std::vector<GeneratedImage> images;
  auto t = Clock::now();
  try {
    images = backends.at(Stage::kSynthesize).synthesize(request).value;
  } catch (const Error& e) {
    throw fail("synthesize", e);
  }
  state.record("synthesize", ms_since(t));
  check_budget();

  state.advance(TurnPhase::kCaptioning);
  std::vector<std::optional<Caption>> captions(k);
  t = Clock::now();
  try {
    parallel_bounded(k, limit, [&](std::size_t i) { captions[i] = backends.at(Stage::kCaption).caption(images[i]).value; });
  } catch (const Error& e) {
    throw fail("caption", e);
  }
  state.record("caption", ms_since(t));
  check_budget();

  state.advance(TurnPhase::kSelecting);
  // Slot k holds the query embedding; Q is embedded once per turn.
  std::vector<std::optional<Embedding>> embeddings(k + 1);
  t = Clock::now();
  try {
    parallel_bounded(k + 1, limit, [&](std::size_t i) {
      const std::string& text = i < k ? captions[i]->text() : query;
      embeddings[i] = backends.at(Stage::kEmbed).embed(text).value;
    });
  } catch (const Error& e) {
    throw fail("embed", e);
  }
  state.record("embed", ms_since(t));

  std::vector<CandidatePair> candidates;
  candidates.reserve(k);
  for (std::size_t i = 0; i < k; ++i) candidates.emplace_back(images[i], *captions[i], *embeddings[i]);
  if (observer.candidates_ready) observer.candidates_ready(turn_id, candidates);

  t = Clock::now();
  std::optional<SelectionResult> selected;
  try {
    selected = selection::select(candidates, *embeddings[k]);
  } catch (const Error& e) {
    throw fail("select", e);
  }
  state.record("select", ms_since(t));
  check_budget();
  state.advance(TurnPhase::kDone);

  ConversationTurn turn(turn_id, keywords, query, *embeddings[k], request, std::move(candidates), std::move(*selected),
                        state.timings());
  if (observer.selection_made) observer.selection_made(turn);
  return turn;
}

// ---------------------------------------------------------------------------
// Streams

struct TurnOutcome {
  enum class Kind { kTurn, kEmpty, kFailed };

  Kind kind = Kind::kTurn;
  std::optional<ConversationTurn> turn;
  ErrorCode code = ErrorCode::kInvalidValue;
  std::string stage;
  std::string message;
  StageTimings partial_timings;
};

struct StreamObserver : TurnObserver {
  std::function<void(const std::string& keyword, const std::string& clip_id)> keyword_accepted;
  std::function<void(const TurnOutcome&)> turn_ended;
};

/// Keyword collection plus turn triggering for one frame source. Turns fire
/// on flush() or after `idle_gap_windows` consecutive windows with no newly
/// accepted keyword. Not thread-safe; one session per source.
class StreamSession {
 public:
  StreamSession(PipelineConfig config, const protocol::Backends& backends, ingest::FrameSource source,
                StreamObserver observer = {}, std::function<std::uint64_t()> next_turn_id = {})
      : config_(std::move(config)),
        backends_(&backends),
        segmenter_(source, static_cast<std::size_t>(config_.window_len), static_cast<std::size_t>(config_.stride)),
        observer_(std::move(observer)),
        next_turn_id_(std::move(next_turn_id)) {
    if (!next_turn_id_) {
      next_turn_id_ = [counter = std::uint64_t{0}]() mutable { return ++counter; };
    }
  }

  const PipelineConfig& config() const noexcept { return config_; }
  const KeywordSequence& keywords() const noexcept { return keywords_; }

  /// Takes effect from the next window; called only between turns.
  void set_config(PipelineConfig config) {
    const bool window_changed = config.window_len != config_.window_len || config.stride != config_.stride;
    config_ = std::move(config);
    if (window_changed) {
      segmenter_ = ingest::LiveSegmenter(segmenter_.source(), static_cast<std::size_t>(config_.window_len),
                                         static_cast<std::size_t>(config_.stride));
    }
  }

  /// Live frames; complete windows are recognized immediately.
  std::vector<TurnOutcome> push_frames(std::span<const Frame> frames,
                                       const std::optional<std::string>& hint = std::nullopt) {
    std::vector<TurnOutcome> out;
    for (const auto& clip : segmenter_.push(frames)) recognize(clip, hint, out);
    return out;
  }

  /// A pre-segmented clip.
  std::vector<TurnOutcome> push_clip(const Clip& clip, const std::optional<std::string>& hint = std::nullopt) {
    std::vector<TurnOutcome> out;
    recognize(clip, hint, out);
    return out;
  }

  /// End of utterance.
  TurnOutcome flush() {
    TurnOutcome outcome;
    if (keywords_.empty()) {
      outcome.kind = TurnOutcome::Kind::kEmpty;
      outcome.code = ErrorCode::kEmptyKeywords;
      outcome.message = "no keywords accepted";
    } else {
      try {
        outcome.turn = run_turn(next_turn_id_(), keywords_, config_, *backends_, recognize_ms_, observer_);
        outcome.kind = TurnOutcome::Kind::kTurn;
      } catch (const TurnFailed& e) {
        outcome.kind = TurnOutcome::Kind::kFailed;
        outcome.code = e.code();
        outcome.stage = e.stage();
        outcome.message = e.message();
        outcome.partial_timings = e.partial_timings();
      } catch (const Error& e) {
        outcome.kind = TurnOutcome::Kind::kFailed;
        outcome.code = e.code();
        outcome.message = e.message();
      }
    }
    keywords_ = KeywordSequence();
    recognize_ms_ = 0.0;
    idle_windows_ = 0;
    if (observer_.turn_ended) observer_.turn_ended(outcome);
    return outcome;
  }

 private:
  void recognize(const Clip& clip, const std::optional<std::string>& hint, std::vector<TurnOutcome>& out) {
    protocol::Timed<protocol::RecognizeResponse> result;
    try {
      auto& recognizer = backends_->at(Stage::kRecognize);
      const auto caps = recognizer.handshake();
      const Resolution in = caps.input_resolution.value_or(Resolution{clip.width(), clip.height()});
      result = recognizer.recognize(protocol::RecognizeRequest{ingest::resize_for_model(clip, in.width, in.height), 5, hint});
    } catch (const Error& e) {
      TurnOutcome failed;
      failed.kind = TurnOutcome::Kind::kFailed;
      failed.code = ErrorCode::kStageFailed;
      failed.stage = "recognize";
      failed.message = e.message();
      if (observer_.turn_ended) observer_.turn_ended(failed);
      out.push_back(std::move(failed));
      return;
    }
    recognize_ms_ += result.ms();
    const std::size_t before = keywords_.size();
    keywords_ = accept_gloss(keywords_, result.value.predictions, config_.confidence_threshold, clip.clip_id());
    if (keywords_.size() > before) {
      idle_windows_ = 0;
      if (observer_.keyword_accepted) observer_.keyword_accepted(keywords_.keywords().back(), clip.clip_id());
    } else if (++idle_windows_ >= config_.idle_gap_windows && !keywords_.empty()) {
      out.push_back(flush());
    }
  }

  PipelineConfig config_;
  const protocol::Backends* backends_;
  ingest::LiveSegmenter segmenter_;
  StreamObserver observer_;
  std::function<std::uint64_t()> next_turn_id_;
  KeywordSequence keywords_;
  double recognize_ms_ = 0.0;
  int idle_windows_ = 0;
};

struct Flush {};

struct ClipInput {
  Clip clip;
  std::optional<std::string> hint;
};

struct FrameBatch {
  std::vector<Frame> frames;
  std::optional<std::string> hint;
};

using StreamInput = std::variant<ClipInput, FrameBatch, Flush>;

/// Feeds a whole input sequence through a StreamSession and collects every
/// turn outcome in order.
inline std::vector<TurnOutcome> run_stream(std::span<const StreamInput> inputs, const PipelineConfig& config,
                                           const protocol::Backends& backends, ingest::FrameSource source,
                                           StreamObserver observer = {}) {
  StreamSession session(config, backends, std::move(source), std::move(observer));
  std::vector<TurnOutcome> out;
  for (const auto& input : inputs) {
    std::vector<TurnOutcome> emitted;
    if (const auto* c = std::get_if<ClipInput>(&input)) {
      emitted = session.push_clip(c->clip, c->hint);
    } else if (const auto* b = std::get_if<FrameBatch>(&input)) {
      emitted = session.push_frames(b->frames, b->hint);
    } else {
      emitted.push_back(session.flush());
    }
    for (auto& o : emitted) out.push_back(std::move(o));
  }
  return out;
}

}  // namespace mugcat::pipeline
