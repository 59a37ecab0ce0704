// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// Plain-HTTP transport for stage clients, HTTP hosting of the stub stages, and
// assembly of a Backends set from configured endpoint URLs.

#pragma once

#include <chrono>
#include <map>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <vector>

#include "httplib.h"
#include "mugcat/domain.hpp"
#include "mugcat/error.hpp"
#include "mugcat/protocol.hpp"
#include "mugcat/stubs.hpp"

namespace mugcat::net {

struct Url {
  std::string host;
  int port = 80;
  std::string base_path;  // no trailing slash
};

/// Accepts http://host[:port][/base]. No TLS.
inline Url parse_url(std::string_view text) {
  constexpr std::string_view kScheme = "http://";
  detail::require(text.substr(0, kScheme.size()) == kScheme, ErrorCode::kInvalidValue,
                  "endpoint '" + std::string(text) + "' must start with http://");
  std::string_view rest = text.substr(kScheme.size());
  Url url;
  const auto slash = rest.find('/');
  if (slash != std::string_view::npos) {
    url.base_path = std::string(rest.substr(slash));
    while (!url.base_path.empty() && url.base_path.back() == '/') url.base_path.pop_back();
    rest = rest.substr(0, slash);
  }
  const auto colon = rest.rfind(':');
  if (colon != std::string_view::npos) {
    url.host = std::string(rest.substr(0, colon));
    const std::string port(rest.substr(colon + 1));
    detail::require(!port.empty() && port.find_first_not_of("0123456789") == std::string::npos && port.size() <= 5,
                    ErrorCode::kInvalidValue, "bad port in endpoint '" + std::string(text) + "'");
    url.port = std::stoi(port);
    detail::require(url.port >= 1 && url.port <= 65535, ErrorCode::kInvalidValue,
                    "port out of range in endpoint '" + std::string(text) + "'");
  } else {
    url.host = std::string(rest);
  }
  detail::require(!url.host.empty(), ErrorCode::kInvalidValue, "missing host in endpoint '" + std::string(text) + "'");
  return url;
}

/// One connection per request, so a transport is safe to share across threads.
class HttpTransport : public protocol::Transport {
 public:
  explicit HttpTransport(std::string base_url) : base_(std::move(base_url)), url_(parse_url(base_)) {}

  protocol::HttpReply request(std::string_view method, std::string_view path, std::string_view body,
                              std::chrono::milliseconds deadline) override {
    httplib::Client client(url_.host, url_.port);
    const auto secs = deadline.count() / 1000;
    const auto usecs = (deadline.count() % 1000) * 1000;
    client.set_connection_timeout(secs, usecs);
    client.set_read_timeout(secs, usecs);
    client.set_write_timeout(secs, usecs);
    client.set_keep_alive(false);
    const std::string target = url_.base_path + std::string(path);
    const auto start = std::chrono::steady_clock::now();
    httplib::Result res = method == "GET"    ? client.Get(target)
                          : method == "POST" ? client.Post(target, std::string(body), "application/json")
                                             : throw Error(ErrorCode::kInvalidValue, "unsupported method");
    if (!res) {
      const auto err = res.error();
      const bool timed_out = err == httplib::Error::ConnectionTimeout ||
                             ((err == httplib::Error::Read || err == httplib::Error::Write) &&
                              std::chrono::steady_clock::now() - start >= deadline);
      if (timed_out) {
        throw Error(ErrorCode::kDeadlineExceeded,
                    base_ + " exceeded its " + std::to_string(deadline.count()) + " ms deadline");
      }
      throw Error(ErrorCode::kUnreachable, base_ + ": " + httplib::to_string(err));
    }
    return {res->status, std::move(res->body)};
  }

  std::string endpoint() const override { return base_; }

 private:
  std::string base_;
  Url url_;
};

/// Serves a request handler over HTTP on a background thread.
class HandlerServer {
 public:
  /// Binds immediately; port 0 picks a free port. Throws BindError.
  HandlerServer(protocol::Handler handler, std::string host, int port) : handler_(std::move(handler)), host_(std::move(host)) {
    auto route = [this](const httplib::Request& req, httplib::Response& res) {
      const auto reply = handler_(req.method, req.path, req.body);
      res.status = reply.status;
      res.set_content(reply.body, "application/json");
    };
    // The library default also sets SO_REUSEPORT, which would let a second
    // server share an occupied port instead of failing to bind.
    server_.set_socket_options([](socket_t sock) {
      int yes = 1;
      setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, reinterpret_cast<const void*>(&yes), sizeof yes);
    });
    server_.Get(".*", route);
    server_.Post(".*", route);
    server_.Put(".*", route);
    server_.Delete(".*", route);
    port_ = port == 0 ? server_.bind_to_any_port(host_) : (server_.bind_to_port(host_, port) ? port : -1);
    if (port_ <= 0) {
      throw Error(ErrorCode::kBindError, "cannot bind " + host_ + ":" + std::to_string(port));
    }
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }

  HandlerServer(const HandlerServer&) = delete;
  HandlerServer& operator=(const HandlerServer&) = delete;

  ~HandlerServer() { stop(); }

  void stop() {
    server_.stop();
    if (thread_.joinable()) thread_.join();
  }

  int port() const noexcept { return port_; }
  std::string url() const { return "http://" + host_ + ":" + std::to_string(port_); }

 private:
  protocol::Handler handler_;
  std::string host_;
  httplib::Server server_;
  int port_ = -1;
  std::thread thread_;
};

/// All five stub stages, each on its own port: base + stage index, or free
/// ports when base is 0.
class StubCluster {
 public:
  explicit StubCluster(int port_base = 0, stubs::StubOptions options = {}, std::string host = "127.0.0.1") {
    for (Stage s : kAllStages) services_.push_back(std::make_unique<stubs::StubService>(s, options));
    for (std::size_t i = 0; i < services_.size(); ++i) {
      const int port = port_base == 0 ? 0 : port_base + static_cast<int>(i);
      servers_.push_back(std::make_unique<HandlerServer>(services_[i]->handler(), host, port));
    }
  }

  std::map<Stage, std::string> endpoints() const {
    std::map<Stage, std::string> out;
    for (std::size_t i = 0; i < servers_.size(); ++i) out[services_[i]->stage()] = servers_[i]->url();
    return out;
  }

  void stop() {
    for (auto& s : servers_) s->stop();
  }

 private:
  std::vector<std::unique_ptr<stubs::StubService>> services_;
  std::vector<std::unique_ptr<HandlerServer>> servers_;
};

/// Backends for `endpoints`. Stages without an endpoint are served by
/// in-process stubs, which `fallback` keeps alive.
struct ConnectedBackends {
  protocol::Backends backends;
  std::shared_ptr<stubs::StubSet> fallback;
  std::map<Stage, std::string> endpoints;
};

inline ConnectedBackends connect(const std::map<Stage, std::string>& endpoints, protocol::ClientOptions options = {},
                                 stubs::StubOptions stub_options = {}) {
  ConnectedBackends out;
  out.endpoints = endpoints;
  if (endpoints.size() < kAllStages.size()) {
    out.fallback = std::make_shared<stubs::StubSet>(stub_options, options);
    out.backends = out.fallback->backends();
  }
  for (const auto& [stage, url] : endpoints) {
    out.backends.set(stage, std::make_shared<protocol::StageClient>(stage, std::make_shared<HttpTransport>(url), options));
  }
  return out;
}

}  // namespace mugcat::net
