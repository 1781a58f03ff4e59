// SPDX-License-Identifier: Apache-2.0

#ifndef KOOPDMD_SERVER_HPP
#define KOOPDMD_SERVER_HPP

#include "koopdmd/service.hpp"

#include <atomic>
#include <cstdint>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <thread>

namespace koopdmd {

/// Wire framing: each message is a 4-byte big-endian length followed by that
/// many bytes of UTF-8 JSON.
inline constexpr std::size_t kMaxFrameBytes = 64u << 20;

void write_frame(int fd, const std::string& payload);
/// Returns std::nullopt on orderly close before a header byte arrives.
std::optional<std::string> read_frame(int fd, std::size_t max_bytes = kMaxFrameBytes);

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;
  ServiceDefaults defaults;
};

/// TCP server with one Session per connection, each served on its own thread.
class Server {
public:
  explicit Server(ServerOptions opts);
  ~Server();
  Server(const Server&) = delete;
  Server& operator=(const Server&) = delete;

  /// Binds and starts accepting; returns the bound port.
  std::uint16_t start();
  void stop();
  /// Blocks until stop() is called from another thread.
  void wait();
  std::uint16_t port() const noexcept { return port_; }

private:
  struct Connection {
    int fd = -1;
    std::thread thread;
    std::atomic<bool> done{false};
  };

  void accept_loop();
  void serve_connection(Connection& conn);
  void reap(bool all);

  ServerOptions opts_;
  int listen_fd_ = -1;
  std::uint16_t port_ = 0;
  std::atomic<bool> running_{false};
  std::thread acceptor_;
  std::mutex mu_;
  std::list<Connection> connections_;
};

/// Blocking client for tests and scripted sessions.
class Client {
public:
  Client(const std::string& host, std::uint16_t port);
  ~Client();
  Client(const Client&) = delete;
  Client& operator=(const Client&) = delete;

  void send(const std::string& payload);
  std::string receive();
  /// Sends one message and collects `replies` frames.
  std::vector<std::string> request(const std::string& payload, std::size_t replies = 1);

private:
  int fd_ = -1;
};

}  // namespace koopdmd

#endif
