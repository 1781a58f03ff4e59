// SPDX-License-Identifier: Apache-2.0

#include "koopdmd/server.hpp"

#include "koopdmd/error.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

namespace koopdmd {

namespace {

void send_all(int fd, const char* data, std::size_t len) {
  while (len > 0) {
    const ssize_t w = ::send(fd, data, len, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, std::string("send failed: ") + std::strerror(errno));
    }
    data += w;
    len -= static_cast<std::size_t>(w);
  }
}

// Returns the number of bytes read; short only at end of stream.
std::size_t recv_all(int fd, char* data, std::size_t len) {
  std::size_t got = 0;
  while (got < len) {
    const ssize_t r = ::recv(fd, data + got, len - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw Error(ErrorCode::Io, std::string("recv failed: ") + std::strerror(errno));
    }
    if (r == 0) break;
    got += static_cast<std::size_t>(r);
  }
  return got;
}

}  // namespace

void write_frame(int fd, const std::string& payload) {
  if (payload.size() > kMaxFrameBytes) throw Error(ErrorCode::Protocol, "frame too large");
  const auto len = static_cast<std::uint32_t>(payload.size());
  const char header[4] = {static_cast<char>(len >> 24), static_cast<char>(len >> 16), static_cast<char>(len >> 8),
                          static_cast<char>(len)};
  send_all(fd, header, 4);
  send_all(fd, payload.data(), payload.size());
}

std::optional<std::string> read_frame(int fd, std::size_t max_bytes) {
  unsigned char header[4];
  const std::size_t got = recv_all(fd, reinterpret_cast<char*>(header), 4);
  if (got == 0) return std::nullopt;
  if (got < 4) throw Error(ErrorCode::Protocol, "connection closed inside a frame header");
  const std::uint32_t len = (std::uint32_t{header[0]} << 24) | (std::uint32_t{header[1]} << 16) |
                            (std::uint32_t{header[2]} << 8) | std::uint32_t{header[3]};
  if (len > max_bytes) throw Error(ErrorCode::Protocol, "frame of " + std::to_string(len) + " bytes exceeds the limit");
  std::string payload(len, '\0');
  if (recv_all(fd, payload.data(), len) != len) throw Error(ErrorCode::Protocol, "connection closed inside a frame");
  return payload;
}

Server::Server(ServerOptions opts) : opts_(std::move(opts)) {}

Server::~Server() { stop(); }

std::uint16_t Server::start() {
  if (running_) return port_;
  listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (listen_fd_ < 0) throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
  const int one = 1;
  ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);

  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(opts_.port);
  if (::inet_pton(AF_INET, opts_.host.c_str(), &addr.sin_addr) != 1) {
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::Usage, "host must be an IPv4 address: " + opts_.host);
  }
  if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(listen_fd_, 16) != 0) {
    const std::string why = std::strerror(errno);
    ::close(listen_fd_);
    listen_fd_ = -1;
    throw Error(ErrorCode::Io, "cannot listen on " + opts_.host + ":" + std::to_string(opts_.port) + ": " + why);
  }
  socklen_t len = sizeof addr;
  ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
  port_ = ntohs(addr.sin_port);
  running_ = true;
  acceptor_ = std::thread([this] { accept_loop(); });
  return port_;
}

void Server::accept_loop() {
  while (running_) {
    pollfd p{listen_fd_, POLLIN, 0};
    const int ready = ::poll(&p, 1, 100);
    reap(false);
    if (ready <= 0 || !(p.revents & POLLIN)) continue;
    const int fd = ::accept(listen_fd_, nullptr, nullptr);
    if (fd < 0) continue;
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    std::lock_guard<std::mutex> lock(mu_);
    Connection& conn = connections_.emplace_back();
    conn.fd = fd;
    conn.thread = std::thread([this, &conn] { serve_connection(conn); });
  }
}

void Server::serve_connection(Connection& conn) {
  Session session(opts_.defaults);
  try {
    while (auto frame = read_frame(conn.fd)) {
      for (const std::string& reply : session.handle_text(*frame)) write_frame(conn.fd, reply);
    }
  } catch (const std::exception& e) {
    try {
      write_frame(conn.fd, error_reply("protocol", e.what()).dump());
    } catch (...) {
    }
  }
  conn.done = true;
}

void Server::reap(bool all) {
  std::lock_guard<std::mutex> lock(mu_);
  for (auto it = connections_.begin(); it != connections_.end();) {
    if (all) ::shutdown(it->fd, SHUT_RDWR);
    if (all || it->done) {
      if (it->thread.joinable()) it->thread.join();
      ::close(it->fd);
      it = connections_.erase(it);
    } else {
      ++it;
    }
  }
}

void Server::stop() {
  const bool was_running = running_.exchange(false);
  if (acceptor_.joinable()) acceptor_.join();
  if (was_running) reap(true);
  if (listen_fd_ >= 0) {
    ::close(listen_fd_);
    listen_fd_ = -1;
  }
}

void Server::wait() {
  while (running_) std::this_thread::sleep_for(std::chrono::milliseconds(100));
}

Client::Client(const std::string& host, std::uint16_t port) {
  fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd_ < 0) throw Error(ErrorCode::Io, std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1 ||
      ::connect(fd_, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0) {
    const std::string why = std::strerror(errno);
    ::close(fd_);
    fd_ = -1;
    throw Error(ErrorCode::Io, "cannot connect to " + host + ":" + std::to_string(port) + ": " + why);
  }
  const int one = 1;
  ::setsockopt(fd_, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
}

Client::~Client() {
  if (fd_ >= 0) ::close(fd_);
}

void Client::send(const std::string& payload) { write_frame(fd_, payload); }

std::string Client::receive() {
  auto frame = read_frame(fd_);
  if (!frame) throw Error(ErrorCode::Io, "server closed the connection");
  return *frame;
}

std::vector<std::string> Client::request(const std::string& payload, std::size_t replies) {
  send(payload);
  std::vector<std::string> out;
  for (std::size_t i = 0; i < replies; ++i) out.push_back(receive());
  return out;
}

}  // namespace koopdmd
