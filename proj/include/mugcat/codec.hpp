// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Canonical JSON encoding of the domain types: object keys sorted, no
// insignificant whitespace, binary fields as padded base64. Decoding reports
// failures as DecodeError carrying the JSON path of the offending value.

#pragma once

#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <string_view>
#include <type_traits>
#include <vector>

#include "json.hpp"
#include "mugcat/base64.hpp"
#include "mugcat/domain.hpp"
#include "mugcat/error.hpp"

namespace mugcat {

using Json = nlohmann::json;

namespace codec {

/// Compact dump; nlohmann::json keeps object keys sorted.
inline std::string dump(const Json& j) { return j.dump(-1, ' ', false, Json::error_handler_t::strict); }

inline Json parse(std::string_view text) {
  try {
    return Json::parse(text);
  } catch (const Json::parse_error& e) {
    throw DecodeError("$", std::string("invalid JSON: ") + e.what());
  }
}

/// Read-only cursor into a JSON document that knows its own path.
class Reader {
 public:
  explicit Reader(const Json& j, std::string path = "$") : j_(&j), path_(std::move(path)) {}

  const Json& json() const noexcept { return *j_; }
  const std::string& path() const noexcept { return path_; }

  [[noreturn]] void fail(const std::string& why) const { throw DecodeError(path_, why); }

  Reader field(std::string_view key) const {
    if (!j_->is_object()) fail("expected an object");
    const auto it = j_->find(key);
    if (it == j_->end()) throw DecodeError(path_ + "." + std::string(key), "missing field");
    return Reader(*it, path_ + "." + std::string(key));
  }

  bool has(std::string_view key) const {
    return j_->is_object() && j_->contains(key) && !(*j_)[std::string(key)].is_null();
  }

  std::optional<Reader> optional_field(std::string_view key) const {
    if (!has(key)) return std::nullopt;
    return field(key);
  }

  std::vector<Reader> items() const {
    if (!j_->is_array()) fail("expected an array");
    std::vector<Reader> out;
    out.reserve(j_->size());
    for (std::size_t i = 0; i < j_->size(); ++i) out.emplace_back((*j_)[i], path_ + "[" + std::to_string(i) + "]");
    return out;
  }

  std::string str() const {
    if (!j_->is_string()) fail("expected a string");
    return j_->get<std::string>();
  }

  double number() const {
    if (!j_->is_number()) fail("expected a number");
    return j_->get<double>();
  }

  template <typename Int>
  Int integer() const {
    if (!j_->is_number_integer()) fail("expected an integer");
    if constexpr (std::is_unsigned_v<Int>) {
      if (j_->is_number_unsigned()) return checked<Int>(j_->get<std::uint64_t>());
      const auto v = j_->get<std::int64_t>();
      if (v < 0) fail("expected a non-negative integer");
      return checked<Int>(static_cast<std::uint64_t>(v));
    } else {
      if (j_->is_number_unsigned()) {
        const auto v = j_->get<std::uint64_t>();
        if (v > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) fail("integer out of range");
        return static_cast<Int>(v);
      }
      const auto v = j_->get<std::int64_t>();
      if (v < std::numeric_limits<Int>::min() || v > std::numeric_limits<Int>::max()) fail("integer out of range");
      return static_cast<Int>(v);
    }
  }

  Bytes bytes() const {
    auto decoded = base64::decode(str());
    if (!decoded) fail("invalid or truncated base64");
    return std::move(*decoded);
  }

  /// Runs a domain constructor; invariant violations become DecodeErrors here.
  template <typename F>
  auto build(F&& make) const -> decltype(make()) {
    try {
      return make();
    } catch (const DecodeError&) {
      throw;
    } catch (const Error& e) {
      fail(e.message());
    }
  }

 private:
  template <typename Int>
  Int checked(std::uint64_t v) const {
    if (v > static_cast<std::uint64_t>(std::numeric_limits<Int>::max())) fail("integer out of range");
    return static_cast<Int>(v);
  }

  const Json* j_;
  std::string path_;
};

// ---------------------------------------------------------------------------
// Encoders

inline Json to_json(const Frame& f) {
  return Json{{"index", f.index()},
              {"timestamp_ms", f.timestamp_ms()},
              {"width", f.width()},
              {"height", f.height()},
              {"pixels", base64::encode(f.pixels())}};
}

inline Json to_json(const Clip& c) {
  Json frames = Json::array();
  for (const auto& f : c.frames()) frames.push_back(to_json(f));
  return Json{{"clip_id", c.clip_id()}, {"frames", std::move(frames)}, {"fps", c.fps()},
              {"source_id", c.source_id()}};
}

inline Json to_json(const GlossPrediction& g) { return Json{{"label", g.label()}, {"confidence", g.confidence()}}; }

inline Json to_json(const KeywordSequence& k) {
  return Json{{"keywords", k.keywords()}, {"accepted_at", k.accepted_at()}};
}

inline Json to_json(const SynthesisRequest& r) {
  return Json{{"prompt", r.prompt()}, {"steps", r.steps()}, {"width", r.width()},
              {"height", r.height()}, {"k", r.k()},         {"seed", r.seed()}};
}

/// Content-derived request identifier: 16 hex digits of FNV-1a over the
/// request's canonical JSON.
inline std::string request_id(const SynthesisRequest& r) { return hex16(fnv1a64(dump(to_json(r)))); }

inline Json to_json(const GeneratedImage& g) {
  return Json{{"image_id", g.image_id()},
              {"request_ref", g.request_ref()},
              {"ordinal", g.ordinal()},
              {"png_bytes", base64::encode(g.png_bytes())}};
}

inline Json to_json(const Caption& c) { return Json{{"image_ref", c.image_ref()}, {"text", c.text()}}; }

inline Json to_json(const Embedding& e) {
  return Json{{"dim", e.dim()}, {"vector", std::vector<double>(e.vector().begin(), e.vector().end())}};
}

inline Json to_json(const CandidatePair& c) {
  return Json{{"image", to_json(c.image)},
              {"caption", to_json(c.caption)},
              {"caption_embedding", to_json(c.caption_embedding)},
              {"score", c.score}};
}

inline Json to_json(const SelectionResult& s) {
  return Json{{"selected_index", s.selected_index()},
              {"selected_image", s.selected_image()},
              {"selected_caption", s.selected_caption()},
              {"scores", s.scores()}};
}

inline Json to_json(const ConversationTurn& t) {
  Json candidates = Json::array();
  for (const auto& c : t.candidates()) candidates.push_back(to_json(c));
  Json timings = Json::object();
  for (const auto& [stage, ms] : t.stage_timings_ms()) timings[stage] = ms;
  return Json{{"turn_id", t.turn_id()},
              {"keywords", to_json(t.keywords())},
              {"query_text", t.query_text()},
              {"query_embedding", to_json(t.query_embedding())},
              {"request", to_json(t.request())},
              {"candidates", std::move(candidates)},
              {"selection", to_json(t.selection())},
              {"stage_timings_ms", std::move(timings)},
              {"override", t.override_index() ? Json(*t.override_index()) : Json(nullptr)}};
}

inline Json to_json(const ConfigDraft& d) {
  Json j = Json::object();
  auto put = [&j](const char* key, const auto& opt) {
    if (opt) j[key] = *opt;
  };
  put("window_len", d.window_len);
  put("stride", d.stride);
  put("confidence_threshold", d.confidence_threshold);
  put("k", d.k);
  put("steps", d.steps);
  put("width", d.width);
  put("height", d.height);
  put("seed", d.seed);
  put("caption_concurrency", d.caption_concurrency);
  put("idle_gap_windows", d.idle_gap_windows);
  put("turn_budget_ms", d.turn_budget_ms);
  put("stage_deadline_ms", d.stage_deadline_ms);
  Json endpoints = Json::object();
  for (const auto& [stage, url] : d.endpoints) endpoints[std::string(to_string(stage))] = url;
  j["endpoints"] = std::move(endpoints);
  return j;
}

inline Json to_json(const PipelineConfig& c) { return to_json(to_draft(c)); }

// ---------------------------------------------------------------------------
// Decoders

template <typename T>
struct Decoder;

template <typename T>
T decode(const Reader& r) {
  return Decoder<T>::decode(r);
}

template <typename T>
T decode_json(const Json& j) {
  return codec::decode<T>(Reader(j));
}

template <typename T>
T decode_text(std::string_view text) {
  const Json j = parse(text);
  return codec::decode<T>(Reader(j));
}

template <typename T>
std::string encode(const T& value) {
  return dump(to_json(value));
}

template <>
struct Decoder<Frame> {
  static Frame decode(const Reader& r) {
    const auto index = r.field("index").integer<std::uint64_t>();
    const double ts = r.field("timestamp_ms").number();
    const int w = r.field("width").integer<int>();
    const int h = r.field("height").integer<int>();
    Bytes pixels = r.field("pixels").bytes();
    return r.build([&] { return Frame(index, ts, w, h, std::move(pixels)); });
  }
};

template <>
struct Decoder<Clip> {
  static Clip decode(const Reader& r) {
    std::vector<Frame> frames;
    for (const auto& item : r.field("frames").items()) frames.push_back(Decoder<Frame>::decode(item));
    auto id = r.field("clip_id").str();
    const double fps = r.field("fps").number();
    auto source = r.field("source_id").str();
    return r.build([&] { return Clip(std::move(id), std::move(frames), fps, std::move(source)); });
  }
};

template <>
struct Decoder<GlossPrediction> {
  static GlossPrediction decode(const Reader& r) {
    auto label = r.field("label").str();
    const double conf = r.field("confidence").number();
    return r.build([&] { return GlossPrediction(std::move(label), conf); });
  }
};

inline std::vector<std::string> decode_strings(const Reader& r) {
  std::vector<std::string> out;
  for (const auto& item : r.items()) out.push_back(item.str());
  return out;
}

template <>
struct Decoder<KeywordSequence> {
  static KeywordSequence decode(const Reader& r) {
    auto keywords = decode_strings(r.field("keywords"));
    auto accepted = decode_strings(r.field("accepted_at"));
    return r.build([&] { return KeywordSequence(std::move(keywords), std::move(accepted)); });
  }
};

template <>
struct Decoder<SynthesisRequest> {
  static SynthesisRequest decode(const Reader& r) {
    auto prompt = r.field("prompt").str();
    const int steps = r.field("steps").integer<int>();
    const int w = r.field("width").integer<int>();
    const int h = r.field("height").integer<int>();
    const int k = r.field("k").integer<int>();
    const auto seed = r.field("seed").integer<std::uint64_t>();
    return r.build([&] { return SynthesisRequest(std::move(prompt), steps, {w, h}, k, seed); });
  }
};

template <>
struct Decoder<GeneratedImage> {
  static GeneratedImage decode(const Reader& r) {
    auto id = r.field("image_id").str();
    auto ref = r.field("request_ref").str();
    const int ordinal = r.field("ordinal").integer<int>();
    Bytes png = r.field("png_bytes").bytes();
    return r.build([&] { return GeneratedImage(std::move(id), std::move(ref), ordinal, std::move(png)); });
  }
};

template <>
struct Decoder<Caption> {
  static Caption decode(const Reader& r) {
    auto ref = r.field("image_ref").str();
    auto text = r.field("text").str();
    return r.build([&] { return Caption(std::move(ref), std::move(text)); });
  }
};

template <>
struct Decoder<Embedding> {
  static Embedding decode(const Reader& r) {
    const auto dim = r.field("dim").integer<std::size_t>();
    std::vector<double> v;
    for (const auto& item : r.field("vector").items()) v.push_back(item.number());
    if (v.size() != dim) r.fail("dim " + std::to_string(dim) + " != vector length " + std::to_string(v.size()));
    return r.build([&] { return Embedding(std::move(v)); });
  }
};

template <>
struct Decoder<CandidatePair> {
  static CandidatePair decode(const Reader& r) {
    auto image = Decoder<GeneratedImage>::decode(r.field("image"));
    auto caption = Decoder<Caption>::decode(r.field("caption"));
    auto emb = Decoder<Embedding>::decode(r.field("caption_embedding"));
    const double score = r.field("score").number();
    return r.build([&] { return CandidatePair(std::move(image), std::move(caption), std::move(emb), score); });
  }
};

template <>
struct Decoder<SelectionResult> {
  static SelectionResult decode(const Reader& r) {
    const auto index = r.field("selected_index").integer<std::size_t>();
    auto image = r.field("selected_image").str();
    auto caption = r.field("selected_caption").str();
    std::vector<double> scores;
    for (const auto& item : r.field("scores").items()) scores.push_back(item.number());
    return r.build([&] { return SelectionResult(index, std::move(image), std::move(caption), std::move(scores)); });
  }
};

template <>
struct Decoder<ConversationTurn> {
  static ConversationTurn decode(const Reader& r) {
    const auto id = r.field("turn_id").integer<std::uint64_t>();
    auto keywords = Decoder<KeywordSequence>::decode(r.field("keywords"));
    auto query = r.field("query_text").str();
    auto query_embedding = Decoder<Embedding>::decode(r.field("query_embedding"));
    auto request = Decoder<SynthesisRequest>::decode(r.field("request"));
    std::vector<CandidatePair> candidates;
    for (const auto& item : r.field("candidates").items()) candidates.push_back(Decoder<CandidatePair>::decode(item));
    auto selection = Decoder<SelectionResult>::decode(r.field("selection"));
    StageTimings timings;
    const auto t = r.field("stage_timings_ms");
    if (!t.json().is_object()) t.fail("expected an object");
    for (const auto& [stage, value] : t.json().items()) timings[stage] = Reader(value, t.path() + "." + stage).number();
    std::optional<std::size_t> override_index;
    if (auto o = r.optional_field("override")) override_index = o->integer<std::size_t>();
    return r.build([&] {
      return ConversationTurn(id, std::move(keywords), std::move(query), std::move(query_embedding),
                              std::move(request), std::move(candidates), std::move(selection), std::move(timings),
                              override_index);
    });
  }
};

template <>
struct Decoder<ConfigDraft> {
  static ConfigDraft decode(const Reader& r) {
    if (!r.json().is_object()) r.fail("expected an object");
    static const std::vector<std::string> kKnown{"window_len",          "stride",        "confidence_threshold",
                                                 "k",                   "steps",         "width",
                                                 "height",              "seed",          "caption_concurrency",
                                                 "idle_gap_windows",    "turn_budget_ms", "stage_deadline_ms",
                                                 "endpoints"};
    for (const auto& [key, value] : r.json().items()) {
      if (std::find(kKnown.begin(), kKnown.end(), key) == kKnown.end()) {
        throw DecodeError(r.path() + "." + key, "unknown config key");
      }
    }
    ConfigDraft d;
    auto int_field = [&r](const char* key, std::optional<int>& out) {
      if (auto f = r.optional_field(key)) out = f->integer<int>();
    };
    int_field("window_len", d.window_len);
    int_field("stride", d.stride);
    int_field("k", d.k);
    int_field("steps", d.steps);
    int_field("width", d.width);
    int_field("height", d.height);
    int_field("caption_concurrency", d.caption_concurrency);
    int_field("idle_gap_windows", d.idle_gap_windows);
    int_field("turn_budget_ms", d.turn_budget_ms);
    int_field("stage_deadline_ms", d.stage_deadline_ms);
    if (auto f = r.optional_field("confidence_threshold")) d.confidence_threshold = f->number();
    if (auto f = r.optional_field("seed")) d.seed = f->integer<std::uint64_t>();
    if (auto f = r.optional_field("endpoints")) {
      if (!f->json().is_object()) f->fail("expected an object");
      for (const auto& [name, url] : f->json().items()) {
        const auto stage = parse_stage(name);
        if (!stage) throw DecodeError(f->path() + "." + name, "unknown stage");
        d.endpoints[*stage] = Reader(url, f->path() + "." + name).str();
      }
    }
    return d;
  }
};

}  // namespace codec
}  // namespace mugcat
