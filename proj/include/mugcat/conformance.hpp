// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Protocol conformance checks for one backend endpoint. The same checks apply
// to the stub stages and to any model adapter.

#pragma once

#include <algorithm>
#include <chrono>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "mugcat/codec.hpp"
#include "mugcat/domain.hpp"
#include "mugcat/error.hpp"
#include "mugcat/png.hpp"
#include "mugcat/protocol.hpp"

namespace mugcat::conformance {

struct Check {
  std::string name;
  bool passed = false;
  std::string detail;
};

struct Report {
  Stage stage = Stage::kRecognize;
  std::string endpoint;
  std::vector<Check> checks;

  bool passed() const {
    return !checks.empty() && std::all_of(checks.begin(), checks.end(), [](const Check& c) { return c.passed; });
  }
};

/// How the recognizer must treat debug_label_hint. Stub backends (name
/// prefixed "stub-") honor it; model adapters must ignore it.
enum class HintPolicy { kAuto, kHonored, kIgnored };

struct Options {
  std::chrono::milliseconds deadline{10000};
  HintPolicy hints = HintPolicy::kAuto;
};

namespace internal {

inline Frame gray_frame(int index, int side, std::uint8_t value) {
  return Frame(index, index * 40, side, side, Bytes(static_cast<std::size_t>(side) * side * 3, value));
}

inline Clip probe_clip(int side, int count = 4) {
  std::vector<Frame> frames;
  for (int i = 0; i < count; ++i) frames.push_back(gray_frame(i, side, static_cast<std::uint8_t>(17 * i + 3)));
  return Clip(make_clip_id("conformance", 0), std::move(frames), 25.0, "conformance");
}

inline bool is_error_body(const protocol::HttpReply& r) {
  try {
    const auto e = protocol::decode_text<protocol::ErrorBody>(r.body);
    return !e.code.empty();
  } catch (const Error&) {
    return false;
  }
}

}  // namespace internal

inline Report run(Stage stage, const std::shared_ptr<protocol::Transport>& transport, Options options = {}) {
  Report report{stage, transport->endpoint(), {}};
  auto check = [&](std::string name, const std::function<std::string()>& body) {
    Check c{std::move(name), false, {}};
    try {
      c.detail = body();
      c.passed = c.detail.empty();
    } catch (const std::exception& e) {
      c.detail = e.what();
    }
    report.checks.push_back(std::move(c));
  };
  auto raw = [&](std::string_view method, std::string_view path, std::string_view body) {
    return transport->request(method, path, body, options.deadline);
  };
  protocol::StageClient client(stage, transport, {options.deadline, 4});
  std::optional<protocol::BackendCapabilities> caps;

  check("handshake", [&]() -> std::string {
    caps = client.handshake(true);
    return {};
  });
  if (!caps) return report;

  check("unknown route answers 404 with an error body", [&]() -> std::string {
    const auto r = raw("POST", "/v1/no_such_stage", "{}");
    if (r.status != 404) return "status " + std::to_string(r.status);
    return internal::is_error_body(r) ? "" : "body is not {code, message}";
  });
  check("wrong method answers 405 with an error body", [&]() -> std::string {
    const auto r = raw("GET", protocol::stage_path(stage), "");
    if (r.status != 405) return "status " + std::to_string(r.status);
    return internal::is_error_body(r) ? "" : "body is not {code, message}";
  });
  check("malformed JSON answers 400 with an error body", [&]() -> std::string {
    const auto r = raw("POST", protocol::stage_path(stage), "{not json");
    if (r.status != 400) return "status " + std::to_string(r.status);
    return internal::is_error_body(r) ? "" : "body is not {code, message}";
  });
  check("schema violation answers 400", [&]() -> std::string {
    const auto r = raw("POST", protocol::stage_path(stage), "{\"unexpected\":true}");
    if (r.status != 400) return "status " + std::to_string(r.status);
    return internal::is_error_body(r) ? "" : "body is not {code, message}";
  });

  const SynthesisRequest probe("a red kite over the sea", 5, Resolution{384, 384}, 2, 11);
  switch (stage) {
    case Stage::kRecognize: {
      const Resolution in = caps->input_resolution.value_or(Resolution{32, 32});
      const Clip clip = internal::probe_clip(in.width);
      check("recognize returns ranked predictions", [&]() -> std::string {
        const auto r = client.recognize({clip, 3, std::nullopt});
        if (r.value.predictions.empty()) return "no predictions";
        return {};
      });
      check("recognize is repeatable", [&]() -> std::string {
        const auto a = client.recognize({clip, 3, std::nullopt});
        const auto b = client.recognize({clip, 3, std::nullopt});
        return a.value == b.value ? "" : "two identical requests gave different predictions";
      });
      const bool honored = options.hints == HintPolicy::kHonored ||
                           (options.hints == HintPolicy::kAuto && caps->name.rfind("stub-", 0) == 0);
      check(honored ? "debug_label_hint is honored" : "debug_label_hint is ignored", [&]() -> std::string {
        const auto plain = client.recognize({clip, 3, std::nullopt});
        const auto hinted = client.recognize({clip, 3, std::string("zzconformancehint")});
        const bool used = !hinted.value.predictions.empty() && hinted.value.predictions[0].label() == "zzconformancehint";
        if (honored) return used ? "" : "hint was not applied";
        return (!used && hinted.value == plain.value) ? "" : "hint changed the predictions";
      });
      check("top_k above the protocol maximum answers 400", [&]() -> std::string {
        protocol::RecognizeRequest req{clip, 5, std::nullopt};
        auto j = protocol::to_json(req);
        j["top_k"] = protocol::kMaxTopK + 1;
        const auto r = raw("POST", protocol::stage_path(stage), codec::dump(j));
        return r.status == 400 ? "" : "status " + std::to_string(r.status);
      });
      break;
    }
    case Stage::kSynthesize: {
      check("synthesize returns k images at the requested size", [&]() -> std::string {
        const auto r = client.synthesize(probe);
        return r.value.size() == 2 ? "" : "wrong image count";
      });
      check("synthesize is deterministic for a fixed seed", [&]() -> std::string {
        const auto a = client.synthesize(probe);
        const auto b = client.synthesize(probe);
        return a.value == b.value ? "" : "same seed gave different images";
      });
      check("every declared resolution is served", [&]() -> std::string {
        for (const auto& res : caps->supported_resolutions) {
          const auto r = client.synthesize(SynthesisRequest("x", 1, res, 1, 0));
          if (r.value.size() != 1) return "no image at " + to_string(res);
        }
        return {};
      });
      check("undeclared resolution is rejected with a 4xx error body", [&]() -> std::string {
        auto j = codec::to_json(probe);
        j["width"] = 500;
        j["height"] = 500;
        const auto r = raw("POST", protocol::stage_path(stage), codec::dump(j));
        if (r.status < 400 || r.status >= 500) return "status " + std::to_string(r.status);
        return internal::is_error_body(r) ? "" : "body is not {code, message}";
      });
      break;
    }
    case Stage::kCaption: {
      check("caption echoes the image id", [&]() -> std::string {
        const auto img = GeneratedImage(make_image_id("0000000000000000", 0), "0000000000000000", 0,
                                        png::encode(RgbImage{16, 16, Bytes(16 * 16 * 3, 128)}));
        const auto c = client.caption(img);
        return c.value.text().empty() ? "empty caption" : "";
      });
      break;
    }
    case Stage::kEmbed: {
      check("embedding has the declared dimension", [&]() -> std::string {
        const auto e = client.embed("a photo of a dog");
        return e.value.dim() == static_cast<std::size_t>(*caps->embedding_dim) ? "" : "dimension differs";
      });
      check("empty text is rejected with a 4xx error body", [&]() -> std::string {
        const auto r = raw("POST", protocol::stage_path(stage), "{\"text\":\"\"}");
        if (r.status < 400 || r.status >= 500) return "status " + std::to_string(r.status);
        return internal::is_error_body(r) ? "" : "body is not {code, message}";
      });
      break;
    }
    case Stage::kImageFeatures: {
      check("features have the declared dimension", [&]() -> std::string {
        const Bytes png_bytes = png::encode(RgbImage{16, 16, Bytes(16 * 16 * 3, 200)});
        const auto f = client.image_features("probe-0", png_bytes);
        return f.value.dim() == static_cast<std::size_t>(*caps->embedding_dim) ? "" : "dimension differs";
      });
      check("corrupt image is rejected with an error body", [&]() -> std::string {
        const auto r = raw("POST", protocol::stage_path(stage), "{\"image_id\":\"x\",\"png_bytes\":\"AAAA\"}");
        if (r.status < 400) return "status " + std::to_string(r.status);
        return internal::is_error_body(r) ? "" : "body is not {code, message}";
      });
      break;
    }
  }
  return report;
}

inline Json to_json(const Report& r) {
  Json checks = Json::array();
  for (const auto& c : r.checks) checks.push_back({{"name", c.name}, {"passed", c.passed}, {"detail", c.detail}});
  return {{"stage", std::string(to_string(r.stage))}, {"endpoint", r.endpoint}, {"passed", r.passed()}, {"checks", checks}};
}

}  // namespace mugcat::conformance
