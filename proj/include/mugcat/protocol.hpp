// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Versioned HTTP+JSON protocol between the engine and its model stages.
//
//   GET  /v1/capabilities
//   POST /v1/recognize | /v1/synthesize | /v1/caption | /v1/embed | /v1/image_features
//
// Errors travel as {code, message} with a 4xx/5xx status. Clients validate
// every response against the domain invariants before returning it.

#pragma once

#include <chrono>
#include <cstdint>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <semaphore>
#include <set>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "mugcat/codec.hpp"
#include "mugcat/domain.hpp"
#include "mugcat/error.hpp"
#include "mugcat/png.hpp"

namespace mugcat::protocol {

inline constexpr int kProtocolVersion = 1;
inline constexpr int kMaxTopK = 10;

inline std::string stage_path(Stage stage) { return "/v1/" + std::string(to_string(stage)); }

// ---------------------------------------------------------------------------
// Messages

struct BackendCapabilities {
  Stage stage = Stage::kRecognize;
  std::string name;
  std::string version;
  int protocol_version = kProtocolVersion;
  std::optional<int> embedding_dim;             // embed, image_features
  std::optional<Resolution> input_resolution;   // recognize
  std::optional<int> vocabulary_size;           // recognize
  std::vector<Resolution> supported_resolutions;  // synthesize
  int max_concurrency = 0;                      // 0 = unbounded

  friend bool operator==(const BackendCapabilities&, const BackendCapabilities&) = default;
};

inline void check_capabilities(const BackendCapabilities& c) {
  detail::require(!c.name.empty(), ErrorCode::kInvalidValue, "capabilities need a backend name");
  if (c.stage == Stage::kEmbed || c.stage == Stage::kImageFeatures) {
    detail::require(c.embedding_dim && *c.embedding_dim >= 1, ErrorCode::kInvalidValue,
                    "embedding stages must declare embedding_dim >= 1");
  }
  if (c.stage == Stage::kRecognize) {
    detail::require(c.input_resolution && c.input_resolution->width >= kMinFrameSide &&
                        c.input_resolution->height >= kMinFrameSide,
                    ErrorCode::kInvalidValue, "recognizer must declare an input_resolution of at least 16x16");
    detail::require(c.vocabulary_size && *c.vocabulary_size >= 1, ErrorCode::kInvalidValue,
                    "recognizer must declare vocabulary_size >= 1");
  }
  if (c.stage == Stage::kSynthesize) {
    detail::require(!c.supported_resolutions.empty(), ErrorCode::kInvalidValue,
                    "synthesizer must declare supported_resolutions");
  }
  for (const auto& r : c.supported_resolutions) {
    detail::require(is_allowed_resolution(r), ErrorCode::kInvalidResolution,
                    to_string(r) + " is not an allowed synthesis resolution");
  }
}

struct RecognizeRequest {
  Clip clip;
  int top_k = 5;
  std::optional<std::string> debug_label_hint;

  friend bool operator==(const RecognizeRequest&, const RecognizeRequest&) = default;
};

struct RecognizeResponse {
  std::string clip_id;
  std::vector<GlossPrediction> predictions;

  friend bool operator==(const RecognizeResponse&, const RecognizeResponse&) = default;
};

struct SynthesizeResponse {
  std::string request_id;
  std::vector<GeneratedImage> images;

  friend bool operator==(const SynthesizeResponse&, const SynthesizeResponse&) = default;
};

struct CaptionRequest {
  GeneratedImage image;

  friend bool operator==(const CaptionRequest&, const CaptionRequest&) = default;
};

struct CaptionResponse {
  Caption caption;

  friend bool operator==(const CaptionResponse&, const CaptionResponse&) = default;
};

struct EmbedRequest {
  std::string text;

  friend bool operator==(const EmbedRequest&, const EmbedRequest&) = default;
};

struct EmbedResponse {
  Embedding embedding;

  friend bool operator==(const EmbedResponse&, const EmbedResponse&) = default;
};

struct ImageFeaturesRequest {
  std::string image_id;
  Bytes png_bytes;

  friend bool operator==(const ImageFeaturesRequest&, const ImageFeaturesRequest&) = default;
};

struct ImageFeaturesResponse {
  std::string image_id;
  Embedding features;

  friend bool operator==(const ImageFeaturesResponse&, const ImageFeaturesResponse&) = default;
};

struct ErrorBody {
  std::string code;
  std::string message;

  friend bool operator==(const ErrorBody&, const ErrorBody&) = default;
};

// ---------------------------------------------------------------------------
// Codecs

inline Json resolution_json(Resolution r) { return Json{{"width", r.width}, {"height", r.height}}; }

inline Resolution resolution_from(const codec::Reader& r) {
  return {r.field("width").integer<int>(), r.field("height").integer<int>()};
}

inline Json to_json(const BackendCapabilities& c) {
  Json j{{"stage", std::string(to_string(c.stage))},
         {"name", c.name},
         {"version", c.version},
         {"protocol_version", c.protocol_version},
         {"max_concurrency", c.max_concurrency}};
  if (c.embedding_dim) j["embedding_dim"] = *c.embedding_dim;
  if (c.input_resolution) j["input_resolution"] = resolution_json(*c.input_resolution);
  if (c.vocabulary_size) j["vocabulary_size"] = *c.vocabulary_size;
  if (!c.supported_resolutions.empty()) {
    Json rs = Json::array();
    for (const auto& r : c.supported_resolutions) rs.push_back(resolution_json(r));
    j["supported_resolutions"] = std::move(rs);
  }
  return j;
}

inline Json to_json(const RecognizeRequest& r) {
  Json j{{"clip", codec::to_json(r.clip)}, {"top_k", r.top_k}};
  if (r.debug_label_hint) j["debug_label_hint"] = *r.debug_label_hint;
  return j;
}

inline Json to_json(const RecognizeResponse& r) {
  Json preds = Json::array();
  for (const auto& p : r.predictions) preds.push_back(codec::to_json(p));
  return Json{{"clip_id", r.clip_id}, {"predictions", std::move(preds)}};
}

inline Json to_json(const SynthesizeResponse& r) {
  Json images = Json::array();
  for (const auto& i : r.images) images.push_back(codec::to_json(i));
  return Json{{"request_id", r.request_id}, {"images", std::move(images)}};
}

inline Json to_json(const CaptionRequest& r) { return Json{{"image", codec::to_json(r.image)}}; }
inline Json to_json(const CaptionResponse& r) { return Json{{"caption", codec::to_json(r.caption)}}; }
inline Json to_json(const EmbedRequest& r) { return Json{{"text", r.text}}; }
inline Json to_json(const EmbedResponse& r) { return Json{{"embedding", codec::to_json(r.embedding)}}; }
inline Json to_json(const ImageFeaturesRequest& r) {
  return Json{{"image_id", r.image_id}, {"png_bytes", base64::encode(r.png_bytes)}};
}
inline Json to_json(const ImageFeaturesResponse& r) {
  return Json{{"image_id", r.image_id}, {"features", codec::to_json(r.features)}};
}
inline Json to_json(const ErrorBody& e) { return Json{{"code", e.code}, {"message", e.message}}; }

template <typename T>
std::string encode(const T& value) {
  return codec::dump(to_json(value));
}

template <typename T>
struct Decoder;

template <typename T>
T decode(const codec::Reader& r) {
  return Decoder<T>::decode(r);
}

template <typename T>
T decode_text(std::string_view text) {
  const Json j = codec::parse(text);
  return protocol::decode<T>(codec::Reader(j));
}

template <>
struct Decoder<BackendCapabilities> {
  static BackendCapabilities decode(const codec::Reader& r) {
    BackendCapabilities c;
    const auto stage_name = r.field("stage").str();
    const auto stage = parse_stage(stage_name);
    if (!stage) r.field("stage").fail("unknown stage '" + stage_name + "'");
    c.stage = *stage;
    c.name = r.field("name").str();
    c.version = r.field("version").str();
    c.protocol_version = r.field("protocol_version").integer<int>();
    if (auto f = r.optional_field("max_concurrency")) c.max_concurrency = f->integer<int>();
    if (auto f = r.optional_field("embedding_dim")) c.embedding_dim = f->integer<int>();
    if (auto f = r.optional_field("input_resolution")) c.input_resolution = resolution_from(*f);
    if (auto f = r.optional_field("vocabulary_size")) c.vocabulary_size = f->integer<int>();
    if (auto f = r.optional_field("supported_resolutions")) {
      for (const auto& item : f->items()) c.supported_resolutions.push_back(resolution_from(item));
    }
    return c;
  }
};

template <>
struct Decoder<RecognizeRequest> {
  static RecognizeRequest decode(const codec::Reader& r) {
    RecognizeRequest req{codec::decode<Clip>(r.field("clip")), 5, std::nullopt};
    if (auto f = r.optional_field("top_k")) req.top_k = f->integer<int>();
    if (req.top_k < 1 || req.top_k > kMaxTopK) r.field("top_k").fail("top_k must lie in [1, 10]");
    if (auto f = r.optional_field("debug_label_hint")) req.debug_label_hint = f->str();
    return req;
  }
};

template <>
struct Decoder<RecognizeResponse> {
  static RecognizeResponse decode(const codec::Reader& r) {
    RecognizeResponse resp{r.field("clip_id").str(), {}};
    for (const auto& item : r.field("predictions").items()) {
      resp.predictions.push_back(codec::decode<GlossPrediction>(item));
    }
    return resp;
  }
};

template <>
struct Decoder<SynthesisRequest> {
  static SynthesisRequest decode(const codec::Reader& r) { return codec::decode<SynthesisRequest>(r); }
};

template <>
struct Decoder<SynthesizeResponse> {
  static SynthesizeResponse decode(const codec::Reader& r) {
    SynthesizeResponse resp{r.field("request_id").str(), {}};
    for (const auto& item : r.field("images").items()) resp.images.push_back(codec::decode<GeneratedImage>(item));
    return resp;
  }
};

template <>
struct Decoder<CaptionRequest> {
  static CaptionRequest decode(const codec::Reader& r) {
    return CaptionRequest{codec::decode<GeneratedImage>(r.field("image"))};
  }
};

template <>
struct Decoder<CaptionResponse> {
  static CaptionResponse decode(const codec::Reader& r) {
    return CaptionResponse{codec::decode<Caption>(r.field("caption"))};
  }
};

template <>
struct Decoder<EmbedRequest> {
  static EmbedRequest decode(const codec::Reader& r) { return EmbedRequest{r.field("text").str()}; }
};

template <>
struct Decoder<EmbedResponse> {
  static EmbedResponse decode(const codec::Reader& r) {
    return EmbedResponse{codec::decode<Embedding>(r.field("embedding"))};
  }
};

template <>
struct Decoder<ImageFeaturesRequest> {
  static ImageFeaturesRequest decode(const codec::Reader& r) {
    return ImageFeaturesRequest{r.field("image_id").str(), r.field("png_bytes").bytes()};
  }
};

template <>
struct Decoder<ImageFeaturesResponse> {
  static ImageFeaturesResponse decode(const codec::Reader& r) {
    return ImageFeaturesResponse{r.field("image_id").str(), codec::decode<Embedding>(r.field("features"))};
  }
};

template <>
struct Decoder<ErrorBody> {
  static ErrorBody decode(const codec::Reader& r) { return ErrorBody{r.field("code").str(), r.field("message").str()}; }
};

// ---------------------------------------------------------------------------
// Transport

struct HttpReply {
  int status = 0;
  std::string body;
};

/// One backend endpoint. Implementations throw Error(kUnreachable) when the
/// endpoint cannot be contacted and Error(kDeadlineExceeded) on timeout.
class Transport {
 public:
  virtual ~Transport() = default;
  virtual HttpReply request(std::string_view method, std::string_view path, std::string_view body,
                            std::chrono::milliseconds deadline) = 0;
  virtual std::string endpoint() const = 0;
};

using Handler = std::function<HttpReply(std::string_view method, std::string_view path, std::string_view body)>;

/// Calls a request handler directly, bypassing sockets; the wire encoding is
/// unchanged. Deadlines are checked after the handler returns.
class InProcessTransport : public Transport {
 public:
  InProcessTransport(Handler handler, std::string name) : handler_(std::move(handler)), name_(std::move(name)) {}

  HttpReply request(std::string_view method, std::string_view path, std::string_view body,
                    std::chrono::milliseconds deadline) override {
    const auto start = std::chrono::steady_clock::now();
    HttpReply reply = handler_(method, path, body);
    if (std::chrono::steady_clock::now() - start > deadline) {
      throw Error(ErrorCode::kDeadlineExceeded, name_ + " exceeded its " + std::to_string(deadline.count()) + " ms deadline");
    }
    return reply;
  }

  std::string endpoint() const override { return "inproc://" + name_; }

 private:
  Handler handler_;
  std::string name_;
};

// ---------------------------------------------------------------------------
// Client

template <typename T>
struct Timed {
  T value;
  std::chrono::nanoseconds elapsed{0};

  double ms() const { return std::chrono::duration<double, std::milli>(elapsed).count(); }
  double seconds() const { return std::chrono::duration<double>(elapsed).count(); }
};

struct ClientOptions {
  std::chrono::milliseconds deadline{60000};
  int max_in_flight = 64;
};

/// Typed, validating client for one stage endpoint. Safe for concurrent use;
/// at most `max_in_flight` calls are outstanding at once.
class StageClient {
 public:
  StageClient(Stage stage, std::shared_ptr<Transport> transport, ClientOptions options = {})
      : stage_(stage), transport_(std::move(transport)), options_(options), slots_(checked_limit(options.max_in_flight)) {}

  Stage stage() const noexcept { return stage_; }
  std::string endpoint() const { return transport_->endpoint(); }

  /// GET /v1/capabilities; cached unless `refresh`.
  const BackendCapabilities& handshake(bool refresh = false) {
    std::lock_guard lock(handshake_mu_);
    if (caps_ && !refresh) return *caps_;
    const auto start = std::chrono::steady_clock::now();
    HttpReply reply;
    try {
      reply = transport_->request("GET", "/v1/capabilities", "", options_.deadline);
    } catch (const Error& e) {
      const auto elapsed = std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::steady_clock::now() - start);
      throw Error(ErrorCode::kUnreachable, transport_->endpoint() + " unreachable after " +
                                               std::to_string(elapsed.count()) + " ms (" + e.message() + ")");
    }
    if (reply.status != 200) {
      throw Error(ErrorCode::kUnreachable,
                  transport_->endpoint() + " capabilities returned HTTP " + std::to_string(reply.status));
    }
    BackendCapabilities caps;
    try {
      caps = decode_text<BackendCapabilities>(reply.body);
      check_capabilities(caps);
    } catch (const Error& e) {
      throw Error(ErrorCode::kMalformedResponse, "capabilities from " + transport_->endpoint() + ": " + e.message());
    }
    if (caps.protocol_version != kProtocolVersion) {
      throw Error(ErrorCode::kUnsupportedVersion,
                  "backend speaks protocol v" + std::to_string(caps.protocol_version) + ", engine speaks v1");
    }
    if (caps.stage != stage_) {
      throw Error(ErrorCode::kStageMismatch, transport_->endpoint() + " serves stage " + std::string(to_string(caps.stage)) +
                                                 ", expected " + std::string(to_string(stage_)));
    }
    caps_ = std::move(caps);
    return *caps_;
  }

  std::optional<BackendCapabilities> capabilities() const {
    std::lock_guard lock(handshake_mu_);
    return caps_;
  }

  Timed<RecognizeResponse> recognize(const RecognizeRequest& request) {
    expect(Stage::kRecognize);
    auto t = call<RecognizeResponse>(encode(request));
    const auto& resp = t.value;
    malformed_unless(resp.clip_id == request.clip.clip_id(), "recognize response echoes clip " + resp.clip_id);
    malformed_unless(resp.predictions.size() <= static_cast<std::size_t>(request.top_k),
                     "recognize returned more than top_k predictions");
    for (std::size_t i = 1; i < resp.predictions.size(); ++i) {
      malformed_unless(resp.predictions[i - 1].confidence() >= resp.predictions[i].confidence(),
                       "predictions are not sorted by confidence");
    }
    return t;
  }

  Timed<std::vector<GeneratedImage>> synthesize(const SynthesisRequest& request) {
    expect(Stage::kSynthesize);
    auto t = call<SynthesizeResponse>(codec::encode(request));
    const std::string id = codec::request_id(request);
    auto& resp = t.value;
    malformed_unless(resp.request_id == id, "synthesize response echoes request " + resp.request_id);
    malformed_unless(resp.images.size() == static_cast<std::size_t>(request.k()),
                     "expected " + std::to_string(request.k()) + " images, got " + std::to_string(resp.images.size()));
    std::set<std::string> ids;
    for (std::size_t i = 0; i < resp.images.size(); ++i) {
      const auto& img = resp.images[i];
      malformed_unless(img.ordinal() == static_cast<int>(i), "image ordinals are not contiguous from 0");
      malformed_unless(img.request_ref() == id, "image " + img.image_id() + " refers to another request");
      malformed_unless(ids.insert(img.image_id()).second, "duplicate image id " + img.image_id());
      png::Header h;
      try {
        h = png::read_header(img.png_bytes());
      } catch (const Error& e) {
        malformed_unless(false, "image " + img.image_id() + ": " + e.message());
      }
      malformed_unless(h.width == request.width() && h.height == request.height(),
                       "image " + img.image_id() + " is not " + to_string(request.resolution()));
    }
    return {std::move(resp.images), t.elapsed};
  }

  Timed<Caption> caption(const GeneratedImage& image) {
    expect(Stage::kCaption);
    auto t = call<CaptionResponse>(encode(CaptionRequest{image}));
    malformed_unless(t.value.caption.image_ref() == image.image_id(), "caption does not echo image id");
    return {std::move(t.value.caption), t.elapsed};
  }

  Timed<Embedding> embed(const std::string& text) {
    expect(Stage::kEmbed);
    detail::require(!text.empty(), ErrorCode::kEmptyText, "cannot embed empty text");
    auto t = call<EmbedResponse>(encode(EmbedRequest{text}));
    check_dim(t.value.embedding);
    malformed_unless(!t.value.embedding.is_zero(), "embedding of non-empty text is all zeros");
    return {std::move(t.value.embedding), t.elapsed};
  }

  Timed<Embedding> image_features(const std::string& image_id, std::span<const std::uint8_t> png_bytes) {
    expect(Stage::kImageFeatures);
    auto t = call<ImageFeaturesResponse>(encode(ImageFeaturesRequest{image_id, Bytes(png_bytes.begin(), png_bytes.end())}));
    malformed_unless(t.value.image_id == image_id, "image_features does not echo image id");
    check_dim(t.value.features);
    return {std::move(t.value.features), t.elapsed};
  }

  /// Wall time of every completed stage call, in milliseconds.
  std::vector<double> call_log_ms() const {
    std::lock_guard lock(log_mu_);
    return call_log_ms_;
  }

  int in_flight_limit() const noexcept { return options_.max_in_flight; }

 private:
  static constexpr int kMaxInFlight = 1024;

  static int checked_limit(int n) {
    detail::require(n >= 1 && n <= kMaxInFlight, ErrorCode::kInvalidValue, "max_in_flight must lie in [1, 1024]");
    return n;
  }

  void expect(Stage s) const {
    detail::require(s == stage_, ErrorCode::kStageMismatch,
                    "client for " + std::string(to_string(stage_)) + " cannot call " + std::string(to_string(s)));
  }

  static void malformed_unless(bool ok, const std::string& why) {
    if (!ok) throw Error(ErrorCode::kMalformedResponse, why);
  }

  void check_dim(const Embedding& e) {
    const auto& caps = handshake();
    malformed_unless(caps.embedding_dim && e.dim() == static_cast<std::size_t>(*caps.embedding_dim),
                     "embedding dim " + std::to_string(e.dim()) + " differs from the handshake dim");
  }

  template <typename Response>
  Timed<Response> call(const std::string& body) {
    handshake();
    slots_.acquire();
    struct Release {
      std::counting_semaphore<kMaxInFlight>& s;
      ~Release() { s.release(); }
    } release{slots_};

    const auto start = std::chrono::steady_clock::now();
    HttpReply reply = transport_->request("POST", stage_path(stage_), body, options_.deadline);
    const auto elapsed = std::chrono::steady_clock::now() - start;
    if (reply.status >= 400) {
      std::string message = "HTTP " + std::to_string(reply.status);
      try {
        const auto err = decode_text<ErrorBody>(reply.body);
        message += " " + err.code + ": " + err.message;
      } catch (const Error&) {
        message += " " + reply.body.substr(0, 200);
      }
      throw Error(ErrorCode::kBackendError, std::string(to_string(stage_)) + " failed: " + message);
    }
    if (reply.status != 200) {
      throw Error(ErrorCode::kMalformedResponse, "unexpected HTTP status " + std::to_string(reply.status));
    }
    Timed<Response> out{decode_response<Response>(reply.body), std::chrono::duration_cast<std::chrono::nanoseconds>(elapsed)};
    {
      std::lock_guard lock(log_mu_);
      call_log_ms_.push_back(out.ms());
    }
    return out;
  }

  template <typename Response>
  static Response decode_response(const std::string& body) {
    try {
      return decode_text<Response>(body);
    } catch (const DecodeError& e) {
      throw Error(ErrorCode::kMalformedResponse, e.message());
    }
  }

  Stage stage_;
  std::shared_ptr<Transport> transport_;
  ClientOptions options_;
  std::counting_semaphore<kMaxInFlight> slots_;
  mutable std::mutex handshake_mu_;
  std::optional<BackendCapabilities> caps_;
  mutable std::mutex log_mu_;
  std::vector<double> call_log_ms_;
};

/// One client per stage.
struct Backends {
  std::shared_ptr<StageClient> recognizer;
  std::shared_ptr<StageClient> synthesizer;
  std::shared_ptr<StageClient> captioner;
  std::shared_ptr<StageClient> embedder;
  std::shared_ptr<StageClient> features;

  StageClient& at(Stage stage) const {
    const std::shared_ptr<StageClient>* slot = nullptr;
    switch (stage) {
      case Stage::kRecognize: slot = &recognizer; break;
      case Stage::kSynthesize: slot = &synthesizer; break;
      case Stage::kCaption: slot = &captioner; break;
      case Stage::kEmbed: slot = &embedder; break;
      case Stage::kImageFeatures: slot = &features; break;
    }
    detail::require(slot && *slot, ErrorCode::kBackendUnreachable,
                    "no backend configured for stage " + std::string(to_string(stage)));
    return **slot;
  }

  void set(Stage stage, std::shared_ptr<StageClient> client) {
    switch (stage) {
      case Stage::kRecognize: recognizer = std::move(client); break;
      case Stage::kSynthesize: synthesizer = std::move(client); break;
      case Stage::kCaption: captioner = std::move(client); break;
      case Stage::kEmbed: embedder = std::move(client); break;
      case Stage::kImageFeatures: features = std::move(client); break;
    }
  }

  void handshake_all() const {
    for (Stage s : kAllStages) at(s).handshake();
  }

  /// Per-stage handshake summary; failures are reported, not thrown.
  Json health() const {
    Json out = Json::object();
    for (Stage s : kAllStages) {
      Json entry;
      try {
        const auto& caps = at(s).handshake();
        entry = {{"ok", true}, {"endpoint", at(s).endpoint()}, {"capabilities", to_json(caps)}};
      } catch (const Error& e) {
        entry = {{"ok", false}, {"error", {{"code", std::string(to_string(e.code()))}, {"message", e.message()}}}};
      }
      out[std::string(to_string(s))] = std::move(entry);
    }
    return out;
  }
};

}  // namespace mugcat::protocol
