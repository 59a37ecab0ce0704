// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <boost/asio/connect.hpp>
#include <boost/asio/ip/tcp.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <filesystem>
#include <fstream>
#include <future>
#include <thread>
#include <unistd.h>

#include "mugcat/gateway.hpp"
#include "mugcat/gateway_server.hpp"
#include "mugcat/http.hpp"
#include "support.hpp"

namespace {

using namespace mugcat;
using namespace std::chrono_literals;
using testing_support::solid_frame;

std::string frames_body(std::uint64_t first, std::size_t n, const std::string& hint = "") {
  Json frames = Json::array();
  for (std::size_t i = 0; i < n; ++i) frames.push_back(codec::to_json(solid_frame(first + i, 16, static_cast<std::uint8_t>(i))));
  Json body{{"frames", std::move(frames)}};
  if (!hint.empty()) body["debug_label_hint"] = hint;
  return codec::dump(body);
}

std::vector<std::string> kinds(const Json& events) {
  std::vector<std::string> out;
  for (const auto& e : events) out.push_back(e["kind"].get<std::string>());
  return out;
}

struct Fixture {
  stubs::StubSet stubs;
  gateway::Gateway gw;

  explicit Fixture(stubs::StubOptions opts = {}, gateway::Options g = {})
      : stubs(opts), gw(testing_support::small_config(2), stubs.backends(), std::move(g)) {}

  Json call(std::string_view method, std::string_view target, std::string_view body = "", int expected = 200) {
    const auto r = gw.handle(method, target, body);
    EXPECT_EQ(r.status, expected) << method << " " << target << ": " << r.body;
    return codec::parse(r.body);
  }

  std::string session() { return call("POST", "/v1/sessions", "{\"source_id\":\"cam\"}", 201)["session_id"]; }

  // Two hinted windows then a flush; returns the flush reply.
  Json book_read(const std::string& id) {
    call("POST", "/v1/sessions/" + id + "/frames", frames_body(0, 4, "book"));
    call("POST", "/v1/sessions/" + id + "/frames", frames_body(4, 4, "read"));
    return call("POST", "/v1/sessions/" + id + "/flush");
  }
};

TEST(Gateway, TurnFlowEmitsEventsInOrder) {
  Fixture f;
  const auto id = f.session();
  const Json flushed = f.book_read(id);
  ASSERT_EQ(flushed["outcome"], "turn");
  EXPECT_EQ(flushed["turn"]["selection"]["selected_caption"], "a photo of book read");

  const Json events = f.call("GET", "/v1/sessions/" + id + "/events")["events"];
  EXPECT_EQ(kinds(events), (std::vector<std::string>{"keyword_accepted", "keyword_accepted", "turn_started",
                                                     "candidates_ready", "selection_made"}));
  for (std::size_t i = 0; i < events.size(); ++i) EXPECT_EQ(events[i]["seq"], i + 1);
  EXPECT_EQ(events[0]["payload"]["keyword"], "book");
  EXPECT_EQ(events[3]["payload"]["candidates"].size(), 2u);

  const Json later = f.call("GET", "/v1/sessions/" + id + "/events?since=3")["events"];
  EXPECT_EQ(kinds(later), (std::vector<std::string>{"candidates_ready", "selection_made"}));

  const Json session = f.call("GET", "/v1/sessions/" + id);
  EXPECT_EQ(session["turn_ids"].size(), 1u);
  EXPECT_TRUE(session["keywords"]["keywords"].empty()) << session.dump();
}

TEST(Gateway, OverrideSelectsAndValidatesIndex) {
  Fixture f;
  const auto id = f.session();
  const auto turn_id = f.book_read(id)["turn"]["turn_id"].get<std::uint64_t>();
  const std::string target = "/v1/turns/" + std::to_string(turn_id);

  // The override sits beside the model's choice; it does not replace it.
  const Json updated = f.call("POST", target + "/override", "{\"index\":1}");
  EXPECT_EQ(updated["override"], 1);
  EXPECT_EQ(updated["selection"]["selected_index"], 0);
  const Json stored = f.call("GET", target);
  EXPECT_EQ(stored["override"], 1);
  EXPECT_EQ(stored["selection"]["selected_index"], 0);

  const Json bad = f.call("POST", target + "/override", "{\"index\":2}", 422);
  EXPECT_EQ(bad["code"], "IndexOutOfRange");
  EXPECT_EQ(f.call("POST", target + "/override", "{\"index\":-1}", 422)["code"], "IndexOutOfRange");
  EXPECT_EQ(f.call("POST", "/v1/turns/999/override", "{\"index\":0}", 404)["code"], "UnknownTurn");

  const Json events = f.call("GET", "/v1/sessions/" + id + "/events?since=5")["events"];
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0]["kind"], "turn_overridden");
  EXPECT_EQ(events[0]["payload"]["override"], 1);
  EXPECT_EQ(events[0]["payload"]["selected_index"], 0);
}

TEST(Gateway, ConfigUpdatesMergeAndValidate) {
  Fixture f;
  const Json before = f.call("GET", "/v1/config");
  const Json after = f.call("PUT", "/v1/config", "{\"k\":4}");
  EXPECT_EQ(after["k"], 4);
  EXPECT_EQ(after["window_len"], before["window_len"]);
  EXPECT_EQ(after["seed"], before["seed"]);

  EXPECT_EQ(f.call("PUT", "/v1/config", "{\"width\":500}", 422)["code"], "InvalidResolution");
  EXPECT_EQ(f.call("PUT", "/v1/config", "{\"endpoints\":{\"embed\":\"http://x:1\"}}", 422)["code"], "InvalidValue");
  EXPECT_EQ(f.call("PUT", "/v1/config", "{\"k\":\"four\"}", 400)["code"], "DecodeError");
  EXPECT_EQ(f.call("GET", "/v1/config")["k"], 4);

  // New turns pick up the change.
  const auto id = f.session();
  EXPECT_EQ(f.book_read(id)["turn"]["candidates"].size(), 4u);
}

TEST(Gateway, ErrorsMapToStatusCodes) {
  Fixture f;
  EXPECT_EQ(f.call("GET", "/v1/sessions/nope", "", 404)["code"], "UnknownSession");
  EXPECT_EQ(f.call("POST", "/v1/sessions/nope/frames", frames_body(0, 1), 404)["code"], "UnknownSession");
  f.call("GET", "/v1/nothing", "", 404);
  f.call("DELETE", "/v1/config", "", 405);
  const auto id = f.session();
  EXPECT_EQ(f.call("POST", "/v1/sessions/" + id + "/frames", "{\"frames\":", 400)["code"], "DecodeError");
  EXPECT_EQ(f.call("POST", "/v1/sessions", "{\"fps\":0}", 422)["code"], "InvalidValue");
}

TEST(Gateway, EmptyFlushIsNotATurn) {
  Fixture f;
  const auto id = f.session();
  const Json r = f.call("POST", "/v1/sessions/" + id + "/flush");
  EXPECT_EQ(r["outcome"], "empty");
  // Subscribers learn why nothing happened, but no turn is recorded.
  const Json events = f.call("GET", "/v1/sessions/" + id + "/events")["events"];
  ASSERT_EQ(events.size(), 1u);
  EXPECT_EQ(events[0]["kind"], "error");
  EXPECT_EQ(events[0]["payload"]["code"], "EmptyKeywords");
  EXPECT_TRUE(f.call("GET", "/v1/sessions/" + id)["turn_ids"].empty());
}

TEST(Gateway, FailedTurnEmitsErrorEvent) {
  stubs::StubSet stubs;
  protocol::Backends backends = stubs.backends();
  backends.set(Stage::kCaption,
               std::make_shared<protocol::StageClient>(
                   Stage::kCaption, std::make_shared<net::HttpTransport>("http://127.0.0.1:1"),
                   protocol::ClientOptions{std::chrono::milliseconds(500), 4}));
  gateway::Gateway gw(testing_support::small_config(2), backends);
  const auto id = codec::parse(gw.handle("POST", "/v1/sessions", "").body)["session_id"].get<std::string>();
  gw.handle("POST", "/v1/sessions/" + id + "/frames", frames_body(0, 4, "book"));
  const auto r = gw.handle("POST", "/v1/sessions/" + id + "/flush", "");
  EXPECT_EQ(r.status, 502) << r.body;
  const Json events = codec::parse(gw.handle("GET", "/v1/sessions/" + id + "/events", "").body)["events"];
  ASSERT_FALSE(events.empty());
  EXPECT_EQ(events.back()["kind"], "error");
  EXPECT_EQ(events.back()["payload"]["stage"], "caption");
}

TEST(Gateway, HealthAndBenchReports) {
  Fixture f;
  const Json health = f.call("GET", "/v1/health");
  EXPECT_EQ(health["status"], "ok");
  EXPECT_EQ(health["stages"].size(), 5u);
  const Json reports = f.call("GET", "/v1/bench/reports")["reports"];
  ASSERT_EQ(reports.size(), 2u);
  EXPECT_EQ(reports[0]["kind"], "recognition");
  EXPECT_EQ(reports[1]["kind"], "sweep");
}

TEST(Gateway, WritesTranscripts) {
  const auto dir = std::filesystem::temp_directory_path() / ("mugcat-transcripts-" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  {
    Fixture f({}, gateway::Options{dir});
    const auto id = f.session();
    f.book_read(id);
    std::ifstream in(dir / (id + ".json"));
    ASSERT_TRUE(in.good());
    const Json t = Json::parse(in);
    EXPECT_EQ(t["turns"].size(), 1u);
    EXPECT_EQ(t["events"].size(), 5u);
  }
  std::filesystem::remove_all(dir);
}

TEST(GatewayServer, RestOverSocket) {
  Fixture f;
  gateway::Server server(f.gw, "127.0.0.1", 0);
  server.start();
  httplib::Client c("127.0.0.1", server.port());
  auto created = c.Post("/v1/sessions", "{}", "application/json");
  ASSERT_TRUE(created);
  EXPECT_EQ(created->status, 201);
  const auto id = codec::parse(created->body)["session_id"].get<std::string>();
  ASSERT_TRUE(c.Post("/v1/sessions/" + id + "/frames", frames_body(0, 4, "book"), "application/json"));
  auto flushed = c.Post("/v1/sessions/" + id + "/flush", "", "application/json");
  ASSERT_TRUE(flushed);
  EXPECT_EQ(flushed->status, 200);
  EXPECT_EQ(codec::parse(flushed->body)["outcome"], "turn");
  auto missing = c.Get("/v1/sessions/zzz");
  ASSERT_TRUE(missing);
  EXPECT_EQ(missing->status, 404);
  server.stop();
}

TEST(GatewayServer, WebSocketReplaysThenStreamsLive) {
  namespace beast = boost::beast;
  namespace asio = boost::asio;
  Fixture f;
  gateway::Server server(f.gw, "127.0.0.1", 0);
  server.start();
  const auto id = f.session();
  f.call("POST", "/v1/sessions/" + id + "/frames", frames_body(0, 4, "book"));

  asio::io_context ioc;
  asio::ip::tcp::resolver resolver(ioc);
  beast::websocket::stream<asio::ip::tcp::socket> ws(ioc);
  asio::connect(ws.next_layer(), resolver.resolve("127.0.0.1", std::to_string(server.port())));
  ws.handshake("127.0.0.1", "/v1/sessions/" + id + "/live?since=0");

  auto next = [&] {
    beast::flat_buffer buf;
    ws.read(buf);
    return codec::parse(beast::buffers_to_string(buf.data()));
  };
  const Json replayed = next();
  EXPECT_EQ(replayed["seq"], 1);
  EXPECT_EQ(replayed["kind"], "keyword_accepted");

  auto flush = std::async(std::launch::async, [&] { return f.gw.handle("POST", "/v1/sessions/" + id + "/flush", ""); });
  std::vector<std::string> live;
  for (int i = 0; i < 3; ++i) live.push_back(next()["kind"]);
  EXPECT_EQ(live, (std::vector<std::string>{"turn_started", "candidates_ready", "selection_made"}));
  EXPECT_EQ(flush.get().status, 200);

  beast::error_code ec;
  ws.close(beast::websocket::close_code::normal, ec);
  server.stop();
}

TEST(GatewayServer, WebSocketUnknownSessionIsRejected) {
  Fixture f;
  gateway::Server server(f.gw, "127.0.0.1", 0);
  server.start();
  httplib::Client c("127.0.0.1", server.port());
  const httplib::Headers upgrade{{"Connection", "Upgrade"},
                                 {"Upgrade", "websocket"},
                                 {"Sec-WebSocket-Version", "13"},
                                 {"Sec-WebSocket-Key", "dGhlIHNhbXBsZSBub25jZQ=="}};
  auto res = c.Get("/v1/sessions/none/live", upgrade);
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 404);
  EXPECT_EQ(codec::parse(res->body)["code"], "UnknownSession");
  server.stop();
}

TEST(GatewayServer, OccupiedPortIsBindError) {
  Fixture f;
  gateway::Server first(f.gw, "127.0.0.1", 0);
  try {
    gateway::Server second(f.gw, "127.0.0.1", first.port());
    ADD_FAILURE() << "expected BindError";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kBindError);
  }
}

TEST(GatewayServer, ShutdownLetsRunningTurnFinish) {
  stubs::StubOptions slow;
  slow.caption_latency = 300ms;
  Fixture f(slow);
  gateway::Server server(f.gw, "127.0.0.1", 0);
  server.start();
  const auto id = f.session();
  f.call("POST", "/v1/sessions/" + id + "/frames", frames_body(0, 4, "book"));

  auto flush = std::async(std::launch::async, [&] {
    httplib::Client c("127.0.0.1", server.port());
    c.set_read_timeout(10, 0);
    return c.Post("/v1/sessions/" + id + "/flush", "", "application/json");
  });
  std::this_thread::sleep_for(100ms);
  server.stop();
  auto res = flush.get();
  ASSERT_TRUE(res);
  EXPECT_EQ(res->status, 200);
  EXPECT_EQ(codec::parse(res->body)["outcome"], "turn");
  EXPECT_EQ(f.gw.handle("POST", "/v1/sessions", "").status, 503);
}

}  // namespace
