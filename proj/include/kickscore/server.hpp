#pragma once

// TCP console server speaking the newline-delimited JSON protocol.
//
// Each connection gets a MatchSnapshot on connect and every broadcast after
// that. Broadcasts are queued per connection on its strand, so a slow console
// never blocks the engine. The first connection to present the referee token
// holds the referee role until it disconnects.

#include <cstdint>
#include <deque>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include <boost/asio.hpp>

#include "kickscore/engine.hpp"
#include "kickscore/protocol.hpp"

namespace kickscore {

class ConsoleServer {
 public:
  using tcp = boost::asio::ip::tcp;

  ConsoleServer(Engine& engine, std::string referee_token, const std::string& address = "127.0.0.1",
                std::uint16_t port = 0)
      : engine_(engine),
        token_(std::move(referee_token)),
        acceptor_(io_, tcp::endpoint(boost::asio::ip::make_address(address), port)) {
    accept();
    thread_ = std::thread([this] { io_.run(); });
  }

  ConsoleServer(const ConsoleServer&) = delete;
  ConsoleServer& operator=(const ConsoleServer&) = delete;

  ~ConsoleServer() { stop(); }

  std::uint16_t port() const { return acceptor_.local_endpoint().port(); }

  void stop() {
    if (stopped_.exchange(true)) return;
    boost::asio::post(io_, [this] {
      boost::system::error_code ec;
      acceptor_.close(ec);
      std::lock_guard lk(sessions_mutex_);
      // io_ runs on a single thread, so touching sessions here is serialized.
      for (auto& w : sessions_)
        if (auto s = w.lock()) s->shutdown();
      io_.stop();
    });
    if (thread_.joinable()) thread_.join();
  }

  std::size_t connections() const {
    std::lock_guard lk(sessions_mutex_);
    std::size_t n = 0;
    for (const auto& w : sessions_) n += !w.expired();
    return n;
  }

 private:
  class Session : public std::enable_shared_from_this<Session> {
   public:
    Session(ConsoleServer& server, tcp::socket socket)
        : server_(server), socket_(std::move(socket)), strand_(boost::asio::make_strand(server.io_)) {}

    void start() {
      auto self = shared_from_this();
      std::weak_ptr<Session> weak = self;
      listener_ = server_.engine_.subscribe([weak](const std::string& line) {
        if (auto s = weak.lock()) s->send(line);
      });
      read();
    }

    void send(std::string line) {
      boost::asio::post(strand_, [self = shared_from_this(), line = std::move(line)]() mutable {
        self->outbox_.push_back(std::move(line));
        if (self->outbox_.size() == 1) self->write();
      });
    }

    void shutdown() {
      if (closed_) return;
      closed_ = true;
      server_.engine_.unsubscribe(listener_);
      server_.release_referee(this);
      boost::system::error_code ec;
      socket_.shutdown(tcp::socket::shutdown_both, ec);
      socket_.close(ec);
    }

   private:
    void read() {
      boost::asio::async_read_until(
          socket_, inbuf_, '\n',
          boost::asio::bind_executor(strand_, [self = shared_from_this()](boost::system::error_code ec, std::size_t n) {
            if (ec) {
              self->shutdown();
              return;
            }
            std::string line(boost::asio::buffers_begin(self->inbuf_.data()),
                             boost::asio::buffers_begin(self->inbuf_.data()) + static_cast<std::ptrdiff_t>(n));
            self->inbuf_.consume(n);
            while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
            if (!line.empty()) self->handle(line);
            self->read();
          }));
    }

    void reply(const nlohmann::json& j) { send(protocol::line(j, server_.engine_.seq())); }

    void handle(const std::string& text) {
      protocol::Inbound msg;
      try {
        msg = protocol::parse_inbound(text);
      } catch (const Error& e) {
        reply(protocol::error_message(e.code(), e.detail()));
        return;
      }
      if (const auto* h = std::get_if<protocol::Hello>(&msg)) {
        if (h->role == protocol::Role::Referee) {
          if (h->token.empty() || h->token != server_.token_) {
            reply(protocol::error_message(ErrorCode::InvalidConfig, "invalid referee token"));
            return;
          }
          if (!server_.claim_referee(this)) {
            reply(protocol::error_message(ErrorCode::InvalidConfig, "referee role already taken"));
            return;
          }
          role_ = protocol::Role::Referee;
        }
        reply({{"type", "HelloAck"}, {"role", std::string(protocol::to_string(role_))}});
        return;
      }
      if (role_ != protocol::Role::Referee) {
        reply(protocol::error_message(ErrorCode::InvalidConfig, "referee role required"));
        return;
      }
      server_.engine_.submit(msg, "console", [self = shared_from_this()](const Engine::CommandResult& r) {
        if (!r.ok) self->reply(protocol::error_message(r.code, r.message));
      });
    }

    void write() {
      boost::asio::async_write(
          socket_, boost::asio::buffer(outbox_.front()),
          boost::asio::bind_executor(strand_, [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
            if (ec) {
              self->shutdown();
              return;
            }
            self->outbox_.pop_front();
            if (!self->outbox_.empty()) self->write();
          }));
    }

    ConsoleServer& server_;
    tcp::socket socket_;
    boost::asio::strand<boost::asio::io_context::executor_type> strand_;
    boost::asio::streambuf inbuf_;
    std::deque<std::string> outbox_;
    std::uint64_t listener_ = 0;
    protocol::Role role_ = protocol::Role::Viewer;
    bool closed_ = false;
  };

  void accept() {
    acceptor_.async_accept([this](boost::system::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto s = std::make_shared<Session>(*this, std::move(socket));
      {
        std::lock_guard lk(sessions_mutex_);
        std::erase_if(sessions_, [](const auto& w) { return w.expired(); });
        sessions_.push_back(s);
      }
      s->start();
      accept();
    });
  }

  bool claim_referee(const void* who) {
    std::lock_guard lk(referee_mutex_);
    if (referee_ && referee_ != who) return false;
    referee_ = who;
    return true;
  }

  void release_referee(const void* who) {
    std::lock_guard lk(referee_mutex_);
    if (referee_ == who) referee_ = nullptr;
  }

  Engine& engine_;
  std::string token_;
  boost::asio::io_context io_;
  tcp::acceptor acceptor_;
  std::thread thread_;
  std::atomic<bool> stopped_{false};
  mutable std::mutex sessions_mutex_;
  std::vector<std::weak_ptr<Session>> sessions_;
  std::mutex referee_mutex_;
  const void* referee_ = nullptr;
};

}  // namespace kickscore
