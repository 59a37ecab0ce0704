// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Operator-facing API as a transport-independent request router. The network
// server in gateway_server.hpp forwards HTTP requests here and relays session
// events to WebSocket subscribers.
//
//   POST /v1/sessions                       create a session
//   POST /v1/sessions/{id}/frames           .mclip chunk or JSON frame batch
//   POST /v1/sessions/{id}/flush            end of utterance, runs a turn
//   GET  /v1/sessions/{id}/events?since=N   events with seq > N
//   POST /v1/turns/{id}/override            {"index": i}
//   GET  /v1/turns/{id}
//   GET  /v1/config, PUT /v1/config         partial PipelineConfig JSON
//   GET  /v1/health
//   GET  /v1/bench/reports

#pragma once

#include <atomic>
#include <charconv>
#include <condition_variable>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "mugcat/bench.hpp"
#include "mugcat/codec.hpp"
#include "mugcat/domain.hpp"
#include "mugcat/error.hpp"
#include "mugcat/ingest.hpp"
#include "mugcat/pipeline.hpp"
#include "mugcat/protocol.hpp"

namespace mugcat::gateway {

struct Response {
  int status = 200;
  std::string body;
  std::string content_type = "application/json";
};

enum class EventKind { kKeywordAccepted, kTurnStarted, kCandidatesReady, kSelectionMade, kTurnOverridden, kError };

constexpr std::string_view to_string(EventKind k) {
  switch (k) {
    case EventKind::kKeywordAccepted: return "keyword_accepted";
    case EventKind::kTurnStarted: return "turn_started";
    case EventKind::kCandidatesReady: return "candidates_ready";
    case EventKind::kSelectionMade: return "selection_made";
    case EventKind::kTurnOverridden: return "turn_overridden";
    case EventKind::kError: return "error";
  }
  return "unknown";
}

struct SessionEvent {
  std::uint64_t seq = 0;
  EventKind kind = EventKind::kError;
  Json payload;
};

inline Json to_json(const SessionEvent& e) {
  return {{"seq", e.seq}, {"kind", std::string(to_string(e.kind))}, {"payload", e.payload}};
}

using EventSink = std::function<void(const SessionEvent&)>;

struct Options {
  std::optional<std::filesystem::path> transcript_dir;
};

inline int status_for(ErrorCode code) {
  switch (code) {
    case ErrorCode::kUnknownSession:
    case ErrorCode::kUnknownTurn: return 404;
    case ErrorCode::kDecodeError:
    case ErrorCode::kBadMagic:
    case ErrorCode::kTruncatedPayload:
    case ErrorCode::kDimensionMismatch: return 400;
    case ErrorCode::kIndexOutOfRange:
    case ErrorCode::kInvalidValue:
    case ErrorCode::kInvalidResolution:
    case ErrorCode::kInvalidWindow:
    case ErrorCode::kInvalidThreshold: return 422;
    case ErrorCode::kStageFailed:
    case ErrorCode::kBackendError:
    case ErrorCode::kMalformedResponse:
    case ErrorCode::kUnreachable:
    case ErrorCode::kBackendUnreachable:
    case ErrorCode::kDeadlineExceeded:
    case ErrorCode::kTurnTimeout: return 502;
    default: return 500;
  }
}

inline Response error_response(int status, ErrorCode code, const std::string& message) {
  return {status, codec::dump(Json{{"code", std::string(to_string(code))}, {"message", message}})};
}

inline Response json_response(const Json& j, int status = 200) { return {status, codec::dump(j)}; }

/// Sessions, turns and configuration behind the REST surface. Thread-safe:
/// requests for different sessions run concurrently, requests for one session
/// are serialized.
class Gateway {
 public:
  Gateway(PipelineConfig config, protocol::Backends backends, Options options = {})
      : config_(std::move(config)), backends_(std::move(backends)), options_(std::move(options)) {
    reports_.push_back(bench::to_json(bench::recorded_recognition_table()));
    reports_.push_back(bench::to_json(bench::recorded_sweep_table()));
  }

  Gateway(const Gateway&) = delete;
  Gateway& operator=(const Gateway&) = delete;

  /// `target` is the request path with an optional query string.
  Response handle(std::string_view method, std::string_view target, std::string_view body,
                  std::string_view content_type = "application/json") {
    const auto q = target.find('?');
    const std::string_view path = target.substr(0, q);
    const std::string_view query = q == std::string_view::npos ? std::string_view{} : target.substr(q + 1);
    const auto parts = split(path);
    const bool mutating = method != "GET";
    if (mutating) {
      std::lock_guard lock(life_mu_);
      if (shutting_down_) return error_response(503, ErrorCode::kInvalidValue, "gateway is shutting down");
      ++in_flight_;
    }
    struct Done {
      Gateway* g;
      bool active;
      ~Done() {
        if (!active) return;
        std::lock_guard lock(g->life_mu_);
        if (--g->in_flight_ == 0) g->idle_cv_.notify_all();
      }
    } done{this, mutating};

    try {
      return route(method, parts, query, body, content_type);
    } catch (const DecodeError& e) {
      return error_response(400, ErrorCode::kDecodeError, e.path() + ": " + e.message());
    } catch (const Error& e) {
      return error_response(status_for(e.code()), e.code(), e.message());
    } catch (const std::exception& e) {
      return error_response(500, ErrorCode::kInvalidValue, e.what());
    }
  }

  /// Delivers events with seq > `since` to `sink` (replay first, then live).
  /// Returns a token for unsubscribe. Throws UnknownSession.
  std::uint64_t subscribe(const std::string& session_id, std::uint64_t since, EventSink sink) {
    auto s = find_session(session_id);
    std::lock_guard lock(s->events_mu);
    for (const auto& e : s->events) {
      if (e.seq > since) sink(e);
    }
    const auto token = ++s->next_token;
    s->sinks.emplace(token, std::move(sink));
    return token;
  }

  void unsubscribe(const std::string& session_id, std::uint64_t token) {
    std::shared_ptr<Session> s;
    {
      std::lock_guard lock(sessions_mu_);
      const auto it = sessions_.find(session_id);
      if (it == sessions_.end()) return;
      s = it->second;
    }
    std::lock_guard lock(s->events_mu);
    s->sinks.erase(token);
  }

  bool has_session(const std::string& session_id) const {
    std::lock_guard lock(sessions_mu_);
    return sessions_.count(session_id) != 0;
  }

  void add_bench_report(Json report) {
    std::lock_guard lock(reports_mu_);
    reports_.push_back(std::move(report));
  }

  PipelineConfig config() const {
    std::lock_guard lock(config_mu_);
    return config_;
  }

  const protocol::Backends& backends() const noexcept { return backends_; }

  /// Refuses new mutating requests and waits for running ones to finish.
  void shutdown() {
    std::unique_lock lock(life_mu_);
    shutting_down_ = true;
    idle_cv_.wait(lock, [this] { return in_flight_ == 0; });
    lock.unlock();
    dump_transcripts();
  }

  bool shutting_down() const {
    std::lock_guard lock(life_mu_);
    return shutting_down_;
  }

  void dump_transcripts() const {
    if (!options_.transcript_dir) return;
    std::vector<std::shared_ptr<Session>> all;
    {
      std::lock_guard lock(sessions_mu_);
      for (const auto& [id, s] : sessions_) all.push_back(s);
    }
    for (const auto& s : all) write_transcript(*s);
  }

 private:
  struct Session {
    Session(std::string id_, ingest::FrameSource source_) : id(std::move(id_)), source(std::move(source_)) {}

    std::string id;
    ingest::FrameSource source;
    std::mutex mu;  // serializes frames, flush and override for this session
    std::unique_ptr<pipeline::StreamSession> stream;
    std::uint64_t config_generation = 0;
    std::uint64_t next_frame_index = 0;
    std::vector<std::uint64_t> turn_ids;

    mutable std::mutex events_mu;
    std::vector<SessionEvent> events;
    std::map<std::uint64_t, EventSink> sinks;
    std::uint64_t next_token = 0;
  };

  struct TurnRecord {
    std::string session_id;
    ConversationTurn turn;
  };

  static std::vector<std::string_view> split(std::string_view path) {
    std::vector<std::string_view> out;
    while (!path.empty()) {
      if (path.front() == '/') {
        path.remove_prefix(1);
        continue;
      }
      const auto slash = path.find('/');
      out.push_back(path.substr(0, slash));
      if (slash == std::string_view::npos) break;
      path.remove_prefix(slash);
    }
    return out;
  }

  static std::optional<std::string> query_param(std::string_view query, std::string_view key) {
    while (!query.empty()) {
      const auto amp = query.find('&');
      const auto pair = query.substr(0, amp);
      const auto eq = pair.find('=');
      if (pair.substr(0, eq) == key) return std::string(eq == std::string_view::npos ? "" : pair.substr(eq + 1));
      if (amp == std::string_view::npos) break;
      query.remove_prefix(amp + 1);
    }
    return std::nullopt;
  }

  static std::uint64_t parse_u64(std::string_view text, ErrorCode code, const std::string& what) {
    std::uint64_t v = 0;
    const auto r = std::from_chars(text.data(), text.data() + text.size(), v);
    if (text.empty() || r.ec != std::errc() || r.ptr != text.data() + text.size()) {
      throw Error(code, "invalid " + what + " '" + std::string(text) + "'");
    }
    return v;
  }

  static Response method_not_allowed() { return error_response(405, ErrorCode::kInvalidValue, "method not allowed"); }

  Response route(std::string_view method, const std::vector<std::string_view>& p, std::string_view query,
                 std::string_view body, std::string_view content_type) {
    if (p.size() < 2 || p[0] != "v1") return error_response(404, ErrorCode::kInvalidValue, "no such route");
    const auto res = p[1];
    if (res == "sessions") {
      if (p.size() == 2) return method == "POST" ? create_session(body) : method_not_allowed();
      const std::string id(p[2]);
      if (p.size() == 4 && p[3] == "frames") return method == "POST" ? post_frames(id, body, content_type) : method_not_allowed();
      if (p.size() == 4 && p[3] == "flush") return method == "POST" ? flush(id) : method_not_allowed();
      if (p.size() == 4 && p[3] == "events") return method == "GET" ? events(id, query) : method_not_allowed();
      if (p.size() == 3) return method == "GET" ? get_session(id) : method_not_allowed();
    } else if (res == "turns" && p.size() >= 3) {
      const auto turn_id = parse_u64(p[2], ErrorCode::kUnknownTurn, "turn id");
      if (p.size() == 3) return method == "GET" ? get_turn(turn_id) : method_not_allowed();
      if (p.size() == 4 && p[3] == "override") return method == "POST" ? override_turn(turn_id, body) : method_not_allowed();
    } else if (res == "config" && p.size() == 2) {
      if (method == "GET") return json_response(codec::to_json(config()));
      if (method == "PUT") return put_config(body);
      return method_not_allowed();
    } else if (res == "health" && p.size() == 2) {
      if (method != "GET") return method_not_allowed();
      Json stages = backends_.health();
      bool ok = true;
      for (const auto& [name, entry] : stages.items()) ok = ok && entry.value("ok", false);
      return json_response({{"status", ok ? "ok" : "degraded"}, {"stages", std::move(stages)}});
    } else if (res == "bench" && p.size() == 3 && p[2] == "reports") {
      if (method != "GET") return method_not_allowed();
      std::lock_guard lock(reports_mu_);
      return json_response({{"reports", reports_}});
    }
    return error_response(404, ErrorCode::kInvalidValue, "no such route");
  }

  std::shared_ptr<Session> find_session(const std::string& id) const {
    std::lock_guard lock(sessions_mu_);
    const auto it = sessions_.find(id);
    if (it == sessions_.end()) throw Error(ErrorCode::kUnknownSession, "unknown session " + id);
    return it->second;
  }

  void emit(Session& s, EventKind kind, Json payload) {
    std::lock_guard lock(s.events_mu);
    SessionEvent e{s.events.size() + 1, kind, std::move(payload)};
    s.events.push_back(e);
    for (const auto& [token, sink] : s.sinks) sink(e);
  }

  pipeline::StreamObserver observer_for(Session& s) {
    pipeline::StreamObserver o;
    o.keyword_accepted = [this, &s](const std::string& keyword, const std::string& clip_id) {
      emit(s, EventKind::kKeywordAccepted, {{"keyword", keyword}, {"clip_id", clip_id}});
    };
    o.turn_started = [this, &s](std::uint64_t turn_id, const KeywordSequence& k, const std::string& query) {
      emit(s, EventKind::kTurnStarted, {{"turn_id", turn_id}, {"keywords", codec::to_json(k)}, {"query_text", query}});
    };
    o.candidates_ready = [this, &s](std::uint64_t turn_id, const std::vector<CandidatePair>& c) {
      Json list = Json::array();
      for (const auto& pair : c) {
        list.push_back({{"image", codec::to_json(pair.image)},
                        {"caption", codec::to_json(pair.caption)},
                        {"caption_embedding", codec::to_json(pair.caption_embedding)}});
      }
      emit(s, EventKind::kCandidatesReady, {{"turn_id", turn_id}, {"candidates", std::move(list)}});
    };
    o.selection_made = [this, &s](const ConversationTurn& t) {
      emit(s, EventKind::kSelectionMade, {{"turn_id", t.turn_id()}, {"selection", codec::to_json(t.selection())}});
    };
    o.turn_ended = [this, &s](const pipeline::TurnOutcome& outcome) {
      if (outcome.kind == pipeline::TurnOutcome::Kind::kTurn) {
        {
          std::lock_guard lock(turns_mu_);
          turns_.insert_or_assign(outcome.turn->turn_id(), TurnRecord{s.id, *outcome.turn});
        }
        s.turn_ids.push_back(outcome.turn->turn_id());
      } else {
        Json timings = Json::object();
        for (const auto& [stage, ms] : outcome.partial_timings) timings[stage] = ms;
        emit(s, EventKind::kError,
             {{"code", std::string(to_string(outcome.code))},
              {"stage", outcome.stage},
              {"message", outcome.message},
              {"partial_timings_ms", std::move(timings)}});
      }
    };
    return o;
  }

  /// Brings the session up to the current config; called between turns.
  void sync_config(Session& s) {
    std::lock_guard lock(config_mu_);
    if (s.config_generation != config_generation_) {
      s.stream->set_config(config_);
      s.config_generation = config_generation_;
    }
  }

  Response create_session(std::string_view body) {
    std::string source_id;
    double fps = 25.0;
    if (!body.empty()) {
      const Json j = codec::parse(body);
      const codec::Reader r(j);
      if (!j.is_object()) r.fail("expected an object");
      if (auto f = r.optional_field("source_id")) source_id = f->str();
      if (auto f = r.optional_field("fps")) fps = f->number();
    }
    detail::require(fps > 0.0, ErrorCode::kInvalidValue, "fps must be positive");
    std::shared_ptr<Session> s;
    {
      std::lock_guard lock(sessions_mu_);
      std::string id = "s" + std::to_string(++next_session_);
      if (source_id.empty()) source_id = id;
      s = std::make_shared<Session>(std::move(id), ingest::FrameSource{source_id, ingest::SourceMode::kLive, fps});
      {
        std::lock_guard config_lock(config_mu_);
        s->stream = std::make_unique<pipeline::StreamSession>(config_, backends_, s->source, observer_for(*s),
                                                              [this] { return ++next_turn_; });
        s->config_generation = config_generation_;
      }
      sessions_.emplace(s->id, s);
    }
    return json_response({{"session_id", s->id}, {"source_id", s->source.source_id}, {"fps", s->source.fps}}, 201);
  }

  Json session_json(Session& s) {
    return {{"session_id", s.id},
            {"source_id", s.source.source_id},
            {"fps", s.source.fps},
            {"keywords", codec::to_json(s.stream->keywords())},
            {"turn_ids", s.turn_ids}};
  }

  Response get_session(const std::string& id) {
    auto s = find_session(id);
    std::lock_guard lock(s->mu);
    return json_response(session_json(*s));
  }

  static bool looks_like_mclip(std::string_view body, std::string_view content_type) {
    return content_type.find("octet-stream") != std::string_view::npos || body.substr(0, 4) == "MCLP";
  }

  Response post_frames(const std::string& id, std::string_view body, std::string_view content_type) {
    auto s = find_session(id);
    std::vector<Frame> frames;
    std::optional<std::string> hint;
    if (looks_like_mclip(body, content_type)) {
      const auto* bytes = reinterpret_cast<const std::uint8_t*>(body.data());
      frames = ingest::decode_mclip(std::span<const std::uint8_t>(bytes, body.size())).frames;
    } else {
      const Json j = codec::parse(body);
      const codec::Reader r(j);
      for (const auto& f : r.field("frames").items()) frames.push_back(codec::decode<Frame>(f));
      if (auto h = r.optional_field("debug_label_hint")) hint = h->str();
    }

    std::lock_guard lock(s->mu);
    sync_config(*s);
    std::vector<Frame> numbered;
    numbered.reserve(frames.size());
    for (const auto& f : frames) {
      const auto index = s->next_frame_index++;
      numbered.push_back(f.reindexed(index, static_cast<double>(index) * 1000.0 / s->source.fps));
    }
    const auto outcomes = s->stream->push_frames(numbered, hint);
    Json turns = Json::array();
    for (const auto& o : outcomes) turns.push_back(outcome_json(o));
    if (!outcomes.empty()) write_transcript(*s);
    return json_response({{"accepted_frames", numbered.size()},
                          {"keywords", codec::to_json(s->stream->keywords())},
                          {"turns", std::move(turns)}});
  }

  static Json outcome_json(const pipeline::TurnOutcome& o) {
    switch (o.kind) {
      case pipeline::TurnOutcome::Kind::kTurn: return {{"outcome", "turn"}, {"turn", codec::to_json(*o.turn)}};
      case pipeline::TurnOutcome::Kind::kEmpty: return {{"outcome", "empty"}, {"message", o.message}};
      case pipeline::TurnOutcome::Kind::kFailed:
        return {{"outcome", "failed"},
                {"code", std::string(to_string(o.code))},
                {"stage", o.stage},
                {"message", o.message}};
    }
    return nullptr;
  }

  Response flush(const std::string& id) {
    auto s = find_session(id);
    std::lock_guard lock(s->mu);
    sync_config(*s);
    const auto outcome = s->stream->flush();
    write_transcript(*s);
    const int status = outcome.kind == pipeline::TurnOutcome::Kind::kFailed ? status_for(outcome.code) : 200;
    return json_response(outcome_json(outcome), status);
  }

  Response events(const std::string& id, std::string_view query) {
    auto s = find_session(id);
    std::uint64_t since = 0;
    if (auto v = query_param(query, "since")) since = parse_u64(*v, ErrorCode::kInvalidValue, "since");
    Json list = Json::array();
    std::lock_guard lock(s->events_mu);
    for (const auto& e : s->events) {
      if (e.seq > since) list.push_back(to_json(e));
    }
    return json_response({{"session_id", id}, {"events", std::move(list)}});
  }

  TurnRecord find_turn(std::uint64_t turn_id) const {
    std::lock_guard lock(turns_mu_);
    const auto it = turns_.find(turn_id);
    if (it == turns_.end()) throw Error(ErrorCode::kUnknownTurn, "unknown turn " + std::to_string(turn_id));
    return it->second;
  }

  Response get_turn(std::uint64_t turn_id) { return json_response(codec::to_json(find_turn(turn_id).turn)); }

  Response override_turn(std::uint64_t turn_id, std::string_view body) {
    const Json j = codec::parse(body);
    const auto index = codec::Reader(j).field("index").integer<std::int64_t>();
    const auto record = find_turn(turn_id);
    auto s = find_session(record.session_id);
    std::lock_guard lock(s->mu);
    const auto k = record.turn.candidates().size();
    if (index < 0 || static_cast<std::size_t>(index) >= k) {
      throw Error(ErrorCode::kIndexOutOfRange,
                  "override index " + std::to_string(index) + " outside [0, " + std::to_string(k) + ")");
    }
    const auto updated = record.turn.with_override(static_cast<std::size_t>(index));
    {
      std::lock_guard turns_lock(turns_mu_);
      turns_.insert_or_assign(turn_id, TurnRecord{record.session_id, updated});
    }
    emit(*s, EventKind::kTurnOverridden,
         {{"turn_id", turn_id}, {"override", index}, {"selected_index", updated.selection().selected_index()}});
    write_transcript(*s);
    return json_response(codec::to_json(updated));
  }

  Response put_config(std::string_view body) {
    const auto draft = codec::decode_text<ConfigDraft>(body);
    std::lock_guard lock(config_mu_);
    if (!draft.endpoints.empty() && draft.endpoints != config_.endpoints) {
      throw Error(ErrorCode::kInvalidValue, "backend endpoints cannot change while serving");
    }
    ConfigDraft merged = to_draft(config_);
    auto take = [](auto& dst, const auto& src) {
      if (src) dst = src;
    };
    take(merged.window_len, draft.window_len);
    take(merged.stride, draft.stride);
    take(merged.confidence_threshold, draft.confidence_threshold);
    take(merged.k, draft.k);
    take(merged.steps, draft.steps);
    take(merged.width, draft.width);
    take(merged.height, draft.height);
    take(merged.seed, draft.seed);
    take(merged.caption_concurrency, draft.caption_concurrency);
    take(merged.idle_gap_windows, draft.idle_gap_windows);
    take(merged.turn_budget_ms, draft.turn_budget_ms);
    take(merged.stage_deadline_ms, draft.stage_deadline_ms);
    // Caption concurrency follows k unless set explicitly.
    if (draft.k && !draft.caption_concurrency && config_.caption_concurrency == config_.k) merged.caption_concurrency = *draft.k;
    config_ = validate(merged);
    ++config_generation_;
    return json_response(codec::to_json(config_));
  }

  void write_transcript(const Session& s) const {
    if (!options_.transcript_dir) return;
    Json events = Json::array();
    {
      std::lock_guard lock(s.events_mu);
      for (const auto& e : s.events) events.push_back(to_json(e));
    }
    Json turns = Json::array();
    {
      std::lock_guard lock(turns_mu_);
      for (const auto& [id, rec] : turns_) {
        if (rec.session_id == s.id) turns.push_back(codec::to_json(rec.turn));
      }
    }
    std::filesystem::create_directories(*options_.transcript_dir);
    std::ofstream out(*options_.transcript_dir / (s.id + ".json"), std::ios::binary | std::ios::trunc);
    out << codec::dump(Json{{"session_id", s.id}, {"events", std::move(events)}, {"turns", std::move(turns)}}) << "\n";
  }

  mutable std::mutex config_mu_;
  PipelineConfig config_;
  std::uint64_t config_generation_ = 0;
  protocol::Backends backends_;
  Options options_;

  mutable std::mutex sessions_mu_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 0;
  std::atomic<std::uint64_t> next_turn_{0};

  mutable std::mutex turns_mu_;
  std::map<std::uint64_t, TurnRecord> turns_;

  mutable std::mutex reports_mu_;
  std::vector<Json> reports_;

  mutable std::mutex life_mu_;
  std::condition_variable idle_cv_;
  bool shutting_down_ = false;
  int in_flight_ = 0;
};

}  // namespace mugcat::gateway
