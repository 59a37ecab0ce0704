// Copyright 2026 The mugcat Authors
// SPDX-License-Identifier: Apache-2.0

// HTTP and WebSocket front end for gateway::Gateway.
//
// REST requests are parsed on the I/O threads and handled on a worker pool,
// so a long turn never stalls other connections. GET /v1/sessions/{id}/live
// upgrades to a WebSocket that replays events with seq > ?since and then
// streams new ones as JSON text frames.

#pragma once

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/http.hpp>
#include <boost/beast/websocket.hpp>

#include <atomic>
#include <charconv>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "mugcat/error.hpp"
#include "mugcat/gateway.hpp"

namespace mugcat::gateway {

namespace server_detail {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace http = beast::http;
namespace websocket = beast::websocket;
using tcp = asio::ip::tcp;

/// Shared state between the server and its connections.
struct Hub {
  Gateway& gateway;
  asio::thread_pool workers;
  std::mutex mu;
  std::condition_variable idle;
  int outstanding = 0;
  std::vector<std::function<void()>> closers;  // close live WebSockets on stop

  Hub(Gateway& g, std::size_t worker_threads) : gateway(g), workers(worker_threads) {}

  void begin() {
    std::lock_guard lock(mu);
    ++outstanding;
  }
  void end() {
    std::lock_guard lock(mu);
    if (--outstanding == 0) idle.notify_all();
  }
};

inline std::optional<std::pair<std::string, std::uint64_t>> live_target(std::string_view target) {
  const auto q = target.find('?');
  const std::string_view path = target.substr(0, q);
  constexpr std::string_view kPrefix = "/v1/sessions/";
  constexpr std::string_view kSuffix = "/live";
  if (path.size() <= kPrefix.size() + kSuffix.size() || path.substr(0, kPrefix.size()) != kPrefix ||
      path.substr(path.size() - kSuffix.size()) != kSuffix) {
    return std::nullopt;
  }
  std::string id(path.substr(kPrefix.size(), path.size() - kPrefix.size() - kSuffix.size()));
  if (id.find('/') != std::string::npos) return std::nullopt;
  std::uint64_t since = 0;
  if (q != std::string_view::npos) {
    const auto query = target.substr(q + 1);
    const auto pos = query.find("since=");
    if (pos != std::string_view::npos) {
      const auto value = query.substr(pos + 6, query.find('&', pos) - pos - 6);
      std::from_chars(value.data(), value.data() + value.size(), since);
    }
  }
  return std::make_pair(std::move(id), since);
}

class WsSession : public std::enable_shared_from_this<WsSession> {
 public:
  WsSession(tcp::socket&& socket, Hub& hub, std::string session_id, std::uint64_t since)
      : ws_(std::move(socket)), hub_(hub), session_id_(std::move(session_id)), since_(since) {}

  void run(http::request<http::string_body> req) {
    ws_.set_option(websocket::stream_base::timeout::suggested(beast::role_type::server));
    ws_.async_accept(req, beast::bind_front_handler(&WsSession::on_accept, shared_from_this()));
  }

  void close() {
    asio::post(ws_.get_executor(), [self = shared_from_this()] {
      if (self->closed_) return;
      self->closing_ = true;
      if (!self->writing_) self->do_close();
    });
  }

 private:
  void on_accept(beast::error_code ec) {
    if (ec) return;
    {
      std::lock_guard lock(hub_.mu);
      hub_.closers.push_back([weak = weak_from_this()] {
        if (auto self = weak.lock()) self->close();
      });
    }
    std::weak_ptr<WsSession> weak = shared_from_this();
    try {
      token_ = hub_.gateway.subscribe(session_id_, since_, [weak](const SessionEvent& e) {
        if (auto self = weak.lock()) {
          asio::post(self->ws_.get_executor(), [self, text = codec::dump(to_json(e))]() mutable { self->send(std::move(text)); });
        }
      });
      subscribed_ = true;
    } catch (const Error&) {
      closing_ = true;
      do_close();
      return;
    }
    do_read();
  }

  void do_read() {
    ws_.async_read(buffer_, beast::bind_front_handler(&WsSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      finish();
      return;
    }
    buffer_.consume(buffer_.size());  // client messages are ignored
    do_read();
  }

  void send(std::string text) {
    if (closing_ || closed_) return;
    queue_.push_back(std::move(text));
    if (!writing_) write_next();
  }

  void write_next() {
    writing_ = true;
    ws_.text(true);
    ws_.async_write(asio::buffer(queue_.front()), beast::bind_front_handler(&WsSession::on_write, shared_from_this()));
  }

  void on_write(beast::error_code ec, std::size_t) {
    writing_ = false;
    if (ec) {
      finish();
      return;
    }
    queue_.pop_front();
    if (!queue_.empty() && !closing_) {
      write_next();
    } else if (closing_) {
      do_close();
    }
  }

  void do_close() {
    if (closed_) return;
    closed_ = true;
    ws_.async_close(websocket::close_code::going_away, [self = shared_from_this()](beast::error_code) { self->finish(); });
  }

  void finish() {
    if (subscribed_) {
      subscribed_ = false;
      hub_.gateway.unsubscribe(session_id_, token_);
    }
  }

  websocket::stream<beast::tcp_stream> ws_;
  Hub& hub_;
  std::string session_id_;
  std::uint64_t since_;
  std::uint64_t token_ = 0;
  bool subscribed_ = false;
  beast::flat_buffer buffer_;
  std::deque<std::string> queue_;
  bool writing_ = false;
  bool closing_ = false;
  bool closed_ = false;
};

class HttpSession : public std::enable_shared_from_this<HttpSession> {
 public:
  HttpSession(tcp::socket&& socket, Hub& hub) : stream_(std::move(socket)), hub_(hub) {}

  void run() {
    asio::dispatch(stream_.get_executor(), beast::bind_front_handler(&HttpSession::do_read, shared_from_this()));
  }

 private:
  static constexpr std::size_t kBodyLimit = 512u << 20;

  void do_read() {
    parser_.emplace();
    parser_->body_limit(kBodyLimit);
    stream_.expires_after(std::chrono::seconds(300));
    http::async_read(stream_, buffer_, *parser_, beast::bind_front_handler(&HttpSession::on_read, shared_from_this()));
  }

  void on_read(beast::error_code ec, std::size_t) {
    if (ec) {
      stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      return;
    }
    auto req = parser_->release();
    if (websocket::is_upgrade(req)) {
      const auto target = req.target();
      const auto live = live_target(std::string_view(target.data(), target.size()));
      if (live && hub_.gateway.has_session(live->first)) {
        stream_.expires_never();
        std::make_shared<WsSession>(stream_.release_socket(), hub_, live->first, live->second)->run(std::move(req));
        return;
      }
      const auto reply = live ? error_response(404, ErrorCode::kUnknownSession, "unknown session " + live->first)
                              : error_response(404, ErrorCode::kInvalidValue, "no WebSocket route");
      write(reply, req.version(), false);
      return;
    }
    hub_.begin();
    auto self = shared_from_this();
    asio::post(hub_.workers, [self, req = std::move(req)]() mutable {
      const auto type = req[http::field::content_type];
      Response reply = self->hub_.gateway.handle(std::string(req.method_string()), std::string(req.target()), req.body(),
                                                 std::string(type));
      asio::post(self->stream_.get_executor(), [self, reply = std::move(reply), version = req.version(),
                                                keep = req.keep_alive()]() mutable {
        self->write(reply, version, keep, /*counted=*/true);
      });
    });
  }

  void write(const Response& reply, unsigned version, bool keep_alive, bool counted = false) {
    auto res = std::make_shared<http::response<http::string_body>>(static_cast<http::status>(reply.status), version);
    res->set(http::field::server, "mugcat");
    res->set(http::field::content_type, reply.content_type);
    res->keep_alive(keep_alive);
    res->body() = reply.body;
    res->prepare_payload();
    http::async_write(stream_, *res, [self = shared_from_this(), res, counted](beast::error_code ec, std::size_t) {
      if (counted) self->hub_.end();
      if (ec) return;
      if (res->keep_alive()) {
        self->do_read();
      } else {
        self->stream_.socket().shutdown(tcp::socket::shutdown_send, ec);
      }
    });
  }

  beast::tcp_stream stream_;
  Hub& hub_;
  beast::flat_buffer buffer_;
  std::optional<http::request_parser<http::string_body>> parser_;
};

}  // namespace server_detail

/// Listens on host:port (0 picks a free port). Throws BindError.
class Server {
 public:
  Server(Gateway& gateway, const std::string& host, unsigned short port, std::size_t io_threads = 2,
         std::size_t worker_threads = 4)
      : hub_(gateway, worker_threads), acceptor_(ioc_), io_threads_(io_threads) {
    namespace asio = server_detail::asio;
    boost::system::error_code ec;
    const auto address = asio::ip::make_address(host, ec);
    if (ec) throw Error(ErrorCode::kBindError, "invalid listen address " + host);
    const server_detail::tcp::endpoint endpoint(address, port);
    acceptor_.open(endpoint.protocol(), ec);
    if (!ec) acceptor_.set_option(asio::socket_base::reuse_address(true), ec);
    if (!ec) acceptor_.bind(endpoint, ec);
    if (!ec) acceptor_.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw Error(ErrorCode::kBindError, "cannot listen on " + host + ":" + std::to_string(port) + ": " + ec.message());
    port_ = acceptor_.local_endpoint().port();
  }

  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  ~Server() { stop(); }

  unsigned short port() const noexcept { return port_; }

  void start() {
    work_.emplace(ioc_.get_executor());
    do_accept();
    for (std::size_t i = 0; i < io_threads_; ++i) threads_.emplace_back([this] { ioc_.run(); });
  }

  /// Stops accepting, lets running requests finish and their responses go
  /// out, closes WebSockets, then joins all threads.
  void stop() {
    if (stopped_.exchange(true)) return;
    server_detail::asio::post(ioc_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
    });
    hub_.gateway.shutdown();
    {
      std::unique_lock lock(hub_.mu);
      hub_.idle.wait_for(lock, std::chrono::seconds(10), [this] { return hub_.outstanding == 0; });
      for (auto& close : hub_.closers) close();
      hub_.closers.clear();
    }
    // Give close frames a moment to flush before the loop stops.
    std::this_thread::sleep_for(std::chrono::milliseconds(50));
    work_.reset();
    ioc_.stop();
    for (auto& t : threads_) {
      if (t.joinable()) t.join();
    }
    hub_.workers.join();
  }

 private:
  void do_accept() {
    acceptor_.async_accept(server_detail::asio::make_strand(ioc_),
                           [this](boost::system::error_code ec, server_detail::tcp::socket socket) {
                             if (ec) return;  // acceptor closed
                             std::make_shared<server_detail::HttpSession>(std::move(socket), hub_)->run();
                             do_accept();
                           });
  }

  server_detail::asio::io_context ioc_;
  server_detail::Hub hub_;
  server_detail::tcp::acceptor acceptor_;
  // Keeps run() alive while a request is on the worker pool and the closed
  // acceptor leaves the loop with nothing else pending.
  std::optional<server_detail::asio::executor_work_guard<server_detail::asio::io_context::executor_type>> work_;
  std::size_t io_threads_;
  unsigned short port_ = 0;
  std::vector<std::thread> threads_;
  std::atomic<bool> stopped_{false};
};

}  // namespace mugcat::gateway
