// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Fixtures and transport doubles shared by the test binaries.

#pragma once

#include <algorithm>
#include <atomic>
#include <chrono>
#include <filesystem>
#include <functional>
#include <memory>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "mugcat/codec.hpp"
#include "mugcat/domain.hpp"
#include "mugcat/ingest.hpp"
#include "mugcat/pipeline.hpp"
#include "mugcat/protocol.hpp"
#include "mugcat/stubs.hpp"

namespace testing_support {

using namespace mugcat;

inline Frame solid_frame(std::uint64_t index, int side, std::uint8_t value) {
  return Frame(index, index * 40.0, side, side, Bytes(static_cast<std::size_t>(side) * side * 3, value));
}

inline std::vector<Frame> frame_run(std::size_t n, int side = 16) {
  std::vector<Frame> frames;
  for (std::size_t i = 0; i < n; ++i) frames.push_back(solid_frame(i, side, static_cast<std::uint8_t>(i * 7)));
  return frames;
}

inline Clip hinted_clip(const std::string& source, std::uint64_t first, int side = 16) {
  std::vector<Frame> frames;
  for (std::uint64_t i = 0; i < 4; ++i) frames.push_back(solid_frame(first + i, side, static_cast<std::uint8_t>(i)));
  return Clip(make_clip_id(source, first), std::move(frames), 25.0, source);
}

inline std::filesystem::path fixture(const std::string& name) {
  return std::filesystem::path(MUGCAT_FIXTURE_DIR) / name;
}

/// Wraps a handler and rewrites successful replies before returning them.
class RewritingTransport : public protocol::Transport {
 public:
  using Rewrite = std::function<std::string(const std::string&)>;

  RewritingTransport(protocol::Handler inner, Rewrite rewrite)
      : inner_(std::move(inner)), rewrite_(std::move(rewrite)) {}

  protocol::HttpReply request(std::string_view method, std::string_view path, std::string_view body,
                              std::chrono::milliseconds) override {
    auto reply = inner_(method, path, body);
    if (reply.status == 200 && path != "/v1/capabilities") reply.body = rewrite_(reply.body);
    return reply;
  }

  std::string endpoint() const override { return "inproc://rewriting"; }

 private:
  protocol::Handler inner_;
  Rewrite rewrite_;
};

/// Records the peak number of overlapping calls to a handler.
class CountingTransport : public protocol::Transport {
 public:
  CountingTransport(protocol::Handler inner, std::chrono::milliseconds hold) : inner_(std::move(inner)), hold_(hold) {}

  protocol::HttpReply request(std::string_view method, std::string_view path, std::string_view body,
                              std::chrono::milliseconds) override {
    if (path == "/v1/capabilities") return inner_(method, path, body);
    const int now = ++current_;
    int seen = peak_.load();
    while (now > seen && !peak_.compare_exchange_weak(seen, now)) {
    }
    ++calls_;
    std::this_thread::sleep_for(hold_);
    auto reply = inner_(method, path, body);
    --current_;
    return reply;
  }

  std::string endpoint() const override { return "inproc://counting"; }
  int peak() const { return peak_.load(); }
  int calls() const { return calls_.load(); }

 private:
  protocol::Handler inner_;
  std::chrono::milliseconds hold_;
  std::atomic<int> current_{0};
  std::atomic<int> peak_{0};
  std::atomic<int> calls_{0};
};

/// Stub backends whose synthesizer drops the last image of every batch.
struct ShortBatchBackends {
  stubs::StubSet stubs;
  stubs::StubService synth{Stage::kSynthesize};
  protocol::Backends backends;

  ShortBatchBackends() {
    backends = stubs.backends();
    auto transport = std::make_shared<RewritingTransport>(synth.handler(), [](const std::string& body) {
      Json j = codec::parse(body);
      j["images"].erase(j["images"].size() - 1);
      return codec::dump(j);
    });
    backends.set(Stage::kSynthesize, std::make_shared<protocol::StageClient>(Stage::kSynthesize, transport));
  }
};

/// Stub backends with the captioner wrapped in a CountingTransport.
struct CountingBackends {
  stubs::StubSet stubs;
  stubs::StubService captioner{Stage::kCaption};
  std::shared_ptr<CountingTransport> counter;
  protocol::Backends backends;

  explicit CountingBackends(std::chrono::milliseconds hold = std::chrono::milliseconds(15)) {
    backends = stubs.backends();
    counter = std::make_shared<CountingTransport>(captioner.handler(), hold);
    backends.set(Stage::kCaption, std::make_shared<protocol::StageClient>(Stage::kCaption, counter));
  }
};

/// A stream that yields the "book", "read" keywords through recognizer hints.
inline std::vector<pipeline::StreamInput> hinted_stream() {
  return {pipeline::ClipInput{hinted_clip("s", 0), std::string("book")},
          pipeline::ClipInput{hinted_clip("s", 4), std::string("read")}, pipeline::Flush{},
          pipeline::ClipInput{hinted_clip("s", 8), std::string("drink")}, pipeline::Flush{}};
}

inline PipelineConfig small_config(int k = 2, int concurrency = 0) {
  ConfigDraft d;
  d.window_len = 4;
  d.stride = 4;
  d.k = k;
  d.width = 384;
  d.height = 384;
  d.seed = 7;
  if (concurrency > 0) d.caption_concurrency = concurrency;
  return validate(d);
}

/// Serialized turn outcomes with wall-clock timings zeroed.
inline std::vector<std::string> serialize(const std::vector<pipeline::TurnOutcome>& outcomes) {
  std::vector<std::string> out;
  for (const auto& o : outcomes) {
    if (!o.turn) {
      out.push_back("outcome:" + std::to_string(static_cast<int>(o.kind)) + ":" + o.message);
      continue;
    }
    Json j = codec::to_json(*o.turn);
    for (auto& [k, v] : j["stage_timings_ms"].items()) v = 0.0;
    out.push_back(codec::dump(j));
  }
  return out;
}

}  // namespace testing_support
