// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Deterministic reference backends for all five stages. They need no model
// weights and no GPU, and every output is a pure function of the request:
//
//   recognize       vocabulary[FNV-1a(center frame) mod 100], confidence 0.9
//   synthesize      SplitMix64 noise, prompt echoed into the first pixels
//   caption         reads the echoed prompt back out of the pixels
//   embed           64-dim signed feature hashing of lowercase tokens
//   image_features  8x8 block-mean luma in [0, 1]

#pragma once

#include <array>
#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "mugcat/codec.hpp"
#include "mugcat/domain.hpp"
#include "mugcat/hash.hpp"
#include "mugcat/png.hpp"
#include "mugcat/protocol.hpp"

namespace mugcat::stubs {

inline constexpr std::array<std::string_view, 100> kVocabulary{
    "book",      "drink",      "computer", "before",    "chair",     "go",       "clothes",  "who",
    "candy",     "cousin",     "deaf",     "fine",      "help",      "no",       "thin",     "walk",
    "year",      "yes",        "all",      "black",     "cool",      "finish",   "hot",      "like",
    "many",      "mother",     "now",      "orange",    "table",     "thanksgiving", "what", "woman",
    "bed",       "blue",       "bowling",  "can",       "dog",       "family",   "fish",     "graduate",
    "hat",       "hearing",    "kiss",     "language",  "later",     "man",      "shirt",    "study",
    "tall",      "white",      "wrong",    "accident",  "apple",     "bird",     "change",   "color",
    "corn",      "cow",        "dance",    "dark",      "doctor",    "eat",      "enjoy",    "forget",
    "give",      "last",       "meet",     "pink",      "pizza",     "play",     "school",   "secretary",
    "short",     "time",       "want",     "work",      "africa",    "basketball", "birthday", "brown",
    "but",       "cheat",      "city",     "cook",      "decide",    "full",     "how",      "jacket",
    "letter",    "medicine",   "need",     "paint",     "paper",     "pull",     "purple",   "right",
    "same",      "son",        "tell",     "read"};

inline constexpr int kEmbeddingDim = 64;
inline constexpr double kStubConfidence = 0.9;
inline constexpr Resolution kRecognizerInput{32, 32};

// ---------------------------------------------------------------------------
// Steganographic prompt echo: "MGCT" | length u32 BE | UTF-8 bytes, written
// over the RGB bytes row-major from pixel (0,0).

inline constexpr std::array<std::uint8_t, 4> kSteganoMagic{'M', 'G', 'C', 'T'};

inline std::size_t stegano_capacity(int width, int height) {
  const std::size_t total = static_cast<std::size_t>(width) * height * 3;
  return total < 8 ? 0 : total - 8;
}

inline void stegano_encode(RgbImage& image, std::string_view text) {
  if (text.size() > stegano_capacity(image.width, image.height)) {
    throw Error(ErrorCode::kPayloadTooLarge, "payload of " + std::to_string(text.size()) + " bytes exceeds the " +
                                                 std::to_string(stegano_capacity(image.width, image.height)) +
                                                 "-byte capacity of a " + std::to_string(image.width) + "x" +
                                                 std::to_string(image.height) + " image");
  }
  auto* out = image.pixels.data();
  std::copy(kSteganoMagic.begin(), kSteganoMagic.end(), out);
  const auto n = static_cast<std::uint32_t>(text.size());
  out[4] = static_cast<std::uint8_t>(n >> 24);
  out[5] = static_cast<std::uint8_t>(n >> 16);
  out[6] = static_cast<std::uint8_t>(n >> 8);
  out[7] = static_cast<std::uint8_t>(n);
  std::copy(text.begin(), text.end(), out + 8);
}

inline std::optional<std::string> stegano_decode(const RgbImage& image) {
  const auto& p = image.pixels;
  if (p.size() < 8 || !std::equal(kSteganoMagic.begin(), kSteganoMagic.end(), p.begin())) return std::nullopt;
  const std::uint32_t n = (std::uint32_t{p[4]} << 24) | (std::uint32_t{p[5]} << 16) | (std::uint32_t{p[6]} << 8) | p[7];
  if (n > stegano_capacity(image.width, image.height)) return std::nullopt;
  return std::string(p.begin() + 8, p.begin() + 8 + n);
}

// ---------------------------------------------------------------------------
// Stage functions

inline std::vector<GlossPrediction> stub_recognize(const Clip& clip,
                                                   const std::optional<std::string>& debug_label_hint = std::nullopt) {
  if (debug_label_hint) return {GlossPrediction(*debug_label_hint, 1.0)};
  const std::uint64_t fingerprint = fnv1a64(clip.center_frame().pixels());
  return {GlossPrediction(std::string(kVocabulary[fingerprint % kVocabulary.size()]), kStubConfidence)};
}

inline RgbImage stub_noise_image(const SynthesisRequest& request, int ordinal) {
  RgbImage image{request.width(), request.height(), {}};
  image.pixels.resize(static_cast<std::size_t>(image.width) * image.height * 3);
  SplitMix64 rng(request.seed() ^ static_cast<std::uint64_t>(ordinal) ^ fnv1a64(request.prompt()));
  for (std::size_t i = 0; i < image.pixels.size(); i += 8) {
    std::uint64_t word = rng.next();
    for (std::size_t b = 0; b < 8 && i + b < image.pixels.size(); ++b, word >>= 8) {
      image.pixels[i + b] = static_cast<std::uint8_t>(word);
    }
  }
  stegano_encode(image, request.prompt() + "|k=" + std::to_string(ordinal));
  return image;
}

inline std::vector<GeneratedImage> stub_synthesize(const SynthesisRequest& request) {
  const std::string id = codec::request_id(request);
  std::vector<GeneratedImage> images;
  images.reserve(static_cast<std::size_t>(request.k()));
  for (int i = 0; i < request.k(); ++i) {
    images.emplace_back(make_image_id(id, i), id, i, png::encode(stub_noise_image(request, i)));
  }
  return images;
}

inline std::string caption_text_for(const std::optional<std::string>& payload) {
  if (!payload || payload->empty()) return "an unrecognized picture";
  const auto marker = payload->rfind("|k=");
  if (marker == std::string::npos) return "a photo of " + *payload;
  const std::string prompt = payload->substr(0, marker);
  const std::string digits = payload->substr(marker + 3);
  if (prompt.empty() || digits.empty() || digits.size() > 9 ||
      !std::all_of(digits.begin(), digits.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return "an unrecognized picture";
  }
  const int ordinal = std::stoi(digits);
  return ordinal == 0 ? "a photo of " + prompt : "a photo of " + prompt + " variant " + std::to_string(ordinal);
}

inline Caption stub_caption(const GeneratedImage& image) {
  return Caption(image.image_id(), caption_text_for(stegano_decode(png::decode(image.png_bytes()))));
}

inline std::vector<std::string> hash_tokens(std::string_view text) {
  std::vector<std::string> tokens;
  std::string cur;
  for (char c : text) {
    if (c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v') {
      if (!cur.empty()) tokens.push_back(std::move(cur));
      cur.clear();
    } else {
      cur.push_back((c >= 'A' && c <= 'Z') ? static_cast<char>(c - 'A' + 'a') : c);
    }
  }
  if (!cur.empty()) tokens.push_back(std::move(cur));
  return tokens;
}

inline Embedding stub_embed(std::string_view text) {
  const auto tokens = hash_tokens(text);
  if (tokens.empty()) throw Error(ErrorCode::kEmptyText, "cannot embed empty text");
  std::vector<double> v(kEmbeddingDim, 0.0);
  for (const auto& t : tokens) {
    const std::uint64_t h = fnv1a64(t);
    v[h % kEmbeddingDim] += (h >> 63) ? -1.0 : 1.0;
  }
  return Embedding(std::move(v));
}

/// Block-mean luma over an 8x8 grid; block (bx, by) covers columns
/// [bx·W/8, (bx+1)·W/8) and rows [by·H/8, (by+1)·H/8).
inline Embedding stub_image_features(const RgbImage& image) {
  detail::require(image.width >= 8 && image.height >= 8, ErrorCode::kInvalidValue,
                  "image_features needs at least 8x8 pixels");
  std::vector<double> v(64, 0.0);
  for (int by = 0; by < 8; ++by) {
    const int y0 = by * image.height / 8;
    const int y1 = (by + 1) * image.height / 8;
    for (int bx = 0; bx < 8; ++bx) {
      const int x0 = bx * image.width / 8;
      const int x1 = (bx + 1) * image.width / 8;
      double sum = 0;
      for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
          const auto* px = &image.pixels[(static_cast<std::size_t>(y) * image.width + x) * 3];
          sum += 0.299 * px[0] + 0.587 * px[1] + 0.114 * px[2];
        }
      }
      v[static_cast<std::size_t>(by * 8 + bx)] = sum / ((y1 - y0) * (x1 - x0)) / 255.0;
    }
  }
  return Embedding(std::move(v));
}

// ---------------------------------------------------------------------------
// Service

/// Latency injection for benchmarks and fault tests. Each value is a floor on
/// the handler's service time, measured from request arrival, so the stub's
/// own decoding work is absorbed rather than added on top.
struct StubOptions {
  std::chrono::microseconds recognize_latency{0};
  std::chrono::microseconds load_latency{0};  // applied to every capabilities call
  std::chrono::microseconds synth_latency_per_step{0};
  std::chrono::microseconds caption_latency{0};
  bool honor_hints = true;
};

inline protocol::BackendCapabilities stub_capabilities(Stage stage) {
  protocol::BackendCapabilities c;
  c.stage = stage;
  c.name = "stub-" + std::string(to_string(stage));
  c.version = "1.0.0";
  switch (stage) {
    case Stage::kRecognize:
      c.input_resolution = kRecognizerInput;
      c.vocabulary_size = static_cast<int>(kVocabulary.size());
      break;
    case Stage::kSynthesize:
      c.supported_resolutions.assign(kAllowedResolutions.begin(), kAllowedResolutions.end());
      break;
    case Stage::kEmbed:
    case Stage::kImageFeatures:
      c.embedding_dim = kEmbeddingDim;
      break;
    case Stage::kCaption:
      break;
  }
  return c;
}

inline protocol::HttpReply error_reply(int status, std::string code, std::string message) {
  return {status, protocol::encode(protocol::ErrorBody{std::move(code), std::move(message)})};
}

/// Request handler for one stub stage. Stateless apart from its options.
class StubService {
 public:
  explicit StubService(Stage stage, StubOptions options = {}) : stage_(stage), options_(options) {}

  Stage stage() const noexcept { return stage_; }

  protocol::HttpReply handle(std::string_view method, std::string_view path, std::string_view body) const {
    using protocol::encode;
    const auto arrival = std::chrono::steady_clock::now();
    try {
      if (path == "/v1/capabilities") {
        if (method != "GET") return error_reply(405, "method_not_allowed", "use GET");
        sleep_until(arrival + options_.load_latency);
        return {200, encode(stub_capabilities(stage_))};
      }
      if (path != protocol::stage_path(stage_)) {
        return error_reply(404, "not_found", "this backend serves " + protocol::stage_path(stage_));
      }
      if (method != "POST") return error_reply(405, "method_not_allowed", "use POST");
      return {200, dispatch(body, arrival)};
    } catch (const DecodeError& e) {
      return error_reply(400, "bad_request", e.message());
    } catch (const Error& e) {
      const int status = e.code() == ErrorCode::kPayloadTooLarge || e.code() == ErrorCode::kEmptyText ||
                                 e.code() == ErrorCode::kInvalidValue || e.code() == ErrorCode::kInvalidResolution
                             ? 422
                             : 500;
      return error_reply(status, std::string(to_string(e.code())), e.message());
    } catch (const std::exception& e) {
      return error_reply(500, "internal", e.what());
    }
  }

  protocol::Handler handler() const {
    return [this](std::string_view m, std::string_view p, std::string_view b) { return handle(m, p, b); };
  }

 private:
  static void sleep_until(std::chrono::steady_clock::time_point t) { std::this_thread::sleep_until(t); }

  std::string dispatch(std::string_view body, std::chrono::steady_clock::time_point arrival) const {
    using namespace protocol;
    switch (stage_) {
      case Stage::kRecognize: {
        const auto req = decode_text<RecognizeRequest>(body);
        const auto hint = options_.honor_hints ? req.debug_label_hint : std::nullopt;
        auto preds = stub_recognize(req.clip, hint);
        if (preds.size() > static_cast<std::size_t>(req.top_k)) preds.erase(preds.begin() + req.top_k, preds.end());
        auto reply = encode(RecognizeResponse{req.clip.clip_id(), std::move(preds)});
        sleep_until(arrival + options_.recognize_latency);
        return reply;
      }
      case Stage::kSynthesize: {
        const auto req = decode_text<SynthesisRequest>(body);
        auto reply = encode(SynthesizeResponse{codec::request_id(req), stub_synthesize(req)});
        sleep_until(arrival + options_.synth_latency_per_step * req.steps());
        return reply;
      }
      case Stage::kCaption: {
        const auto req = decode_text<CaptionRequest>(body);
        auto reply = encode(CaptionResponse{stub_caption(req.image)});
        sleep_until(arrival + options_.caption_latency);
        return reply;
      }
      case Stage::kEmbed: {
        const auto req = decode_text<EmbedRequest>(body);
        return encode(EmbedResponse{stub_embed(req.text)});
      }
      case Stage::kImageFeatures: {
        const auto req = decode_text<ImageFeaturesRequest>(body);
        return encode(ImageFeaturesResponse{req.image_id, stub_image_features(png::decode(req.png_bytes))});
      }
    }
    throw Error(ErrorCode::kInvalidValue, "unknown stage");
  }

  Stage stage_;
  StubOptions options_;
};

/// All five stub stages wired through in-process transports.
class StubSet {
 public:
  explicit StubSet(StubOptions options = {}, protocol::ClientOptions client_options = {}) {
    for (Stage s : kAllStages) services_.emplace_back(s, options);
    for (std::size_t i = 0; i < services_.size(); ++i) {
      auto transport = std::make_shared<protocol::InProcessTransport>(
          services_[i].handler(), "stub-" + std::string(to_string(services_[i].stage())));
      backends_.set(services_[i].stage(),
                    std::make_shared<protocol::StageClient>(services_[i].stage(), transport, client_options));
    }
  }

  StubSet(const StubSet&) = delete;
  StubSet& operator=(const StubSet&) = delete;

  const protocol::Backends& backends() const noexcept { return backends_; }
  const StubService& service(Stage s) const { return services_.at(static_cast<std::size_t>(s)); }

 private:
  std::vector<StubService> services_;
  protocol::Backends backends_;
};

}  // namespace mugcat::stubs
