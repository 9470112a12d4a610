// Copyright 2026 The snd Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//

#ifndef SND_PROTOCOL_TCP_HPP_
#define SND_PROTOCOL_TCP_HPP_

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <cstring>
#include <list>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "snd/error.hpp"
#include "snd/protocol/frame.hpp"
#include "snd/protocol/transport.hpp"

namespace snd {

inline constexpr const char* kEndpointEnv = "SND_ENDPOINT";

struct Endpoint {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;

  std::string ToString() const { return host + ":" + std::to_string(port); }
};

inline Endpoint ParseEndpoint(const std::string& text) {
  const auto colon = text.rfind(':');
  Require(colon != std::string::npos && colon > 0 && colon + 1 < text.size(),
          ErrorCode::kInvalidArgument, "endpoint must look like host:port, got '" + text + "'");
  Endpoint e;
  e.host = text.substr(0, colon);
  const std::string port = text.substr(colon + 1);
  char* end = nullptr;
  const long v = std::strtol(port.c_str(), &end, 10);
  Require(*end == '\0' && v >= 0 && v <= 65535, ErrorCode::kInvalidArgument,
          "bad port in endpoint '" + text + "'");
  e.port = static_cast<std::uint16_t>(v);
  return e;
}

// The flag wins over SND_ENDPOINT; nullopt when neither is set.
inline std::optional<Endpoint> ResolveEndpoint(const std::string& flag_value) {
  if (!flag_value.empty()) return ParseEndpoint(flag_value);
  if (const char* env = std::getenv(kEndpointEnv); env != nullptr && *env != '\0')
    return ParseEndpoint(env);
  return std::nullopt;
}

namespace net {

inline void SendAll(int fd, std::span<const std::uint8_t> bytes) {
  std::size_t sent = 0;
  while (sent < bytes.size()) {
    const ssize_t r = ::send(fd, bytes.data() + sent, bytes.size() - sent, MSG_NOSIGNAL);
    if (r < 0 && errno == EINTR) continue;
    Require(r > 0, ErrorCode::kTransport, std::string("send failed: ") + std::strerror(errno));
    sent += static_cast<std::size_t>(r);
  }
}

// False on a clean end of stream before the first byte.
inline bool RecvAll(int fd, std::uint8_t* out, std::size_t n) {
  std::size_t got = 0;
  while (got < n) {
    const ssize_t r = ::recv(fd, out + got, n - got, 0);
    if (r < 0 && errno == EINTR) continue;
    if (r == 0 && got == 0) return false;
    Require(r > 0, ErrorCode::kTransport, "connection closed mid-frame");
    got += static_cast<std::size_t>(r);
  }
  return true;
}

// Reads one frame's bytes; the header's n and d fix the length. Returns an
// empty vector at end of stream.
inline std::vector<std::uint8_t> ReadFrameBytes(int fd) {
  std::vector<std::uint8_t> bytes(kFrameHeaderBytes);
  if (!RecvAll(fd, bytes.data(), bytes.size())) return {};
  const FrameHeader h = PeekHeader(bytes);
  Require(FramePayloadBytes(h.n, h.d) <= kMaxPayloadBytes, ErrorCode::kFormat,
          "frame payload too large");
  bytes.resize(FrameBytes(h.n, h.d));
  Require(RecvAll(fd, bytes.data() + kFrameHeaderBytes, bytes.size() - kFrameHeaderBytes),
          ErrorCode::kTransport, "connection closed mid-frame");
  return bytes;
}

inline int Connect(const Endpoint& e) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* found = nullptr;
  const std::string port = std::to_string(e.port);
  Require(::getaddrinfo(e.host.c_str(), port.c_str(), &hints, &found) == 0 && found != nullptr,
          ErrorCode::kTransport, "cannot resolve " + e.ToString());
  int fd = -1;
  for (addrinfo* a = found; a != nullptr; a = a->ai_next) {
    fd = ::socket(a->ai_family, a->ai_socktype, a->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, a->ai_addr, a->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(found);
  Require(fd >= 0, ErrorCode::kTransport, "cannot connect to " + e.ToString());
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

}  // namespace net

// One stream connection; requests on it are strictly sequential.
class TcpTransport : public Transport {
 public:
  explicit TcpTransport(const Endpoint& endpoint) : fd_(net::Connect(endpoint)) {}
  ~TcpTransport() override { ::close(fd_); }
  TcpTransport(const TcpTransport&) = delete;
  TcpTransport& operator=(const TcpTransport&) = delete;

 protected:
  std::vector<std::uint8_t> DoExchange(std::span<const std::uint8_t> request) override {
    std::lock_guard<std::mutex> lock(mu_);
    net::SendAll(fd_, request);
    std::vector<std::uint8_t> response = net::ReadFrameBytes(fd_);
    Require(!response.empty(), ErrorCode::kTransport, "server closed the connection");
    return response;
  }

 private:
  int fd_;
  std::mutex mu_;
};

// Accepts connections and answers each frame with handler(frame bytes), one
// thread per connection.
class TcpServer {
 public:
  TcpServer(FrameHandler handler, const Endpoint& bind_to) : handler_(std::move(handler)) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    Require(listen_fd_ >= 0, ErrorCode::kTransport, "socket() failed");
    int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(bind_to.port);
    if (::inet_pton(AF_INET, bind_to.host.c_str(), &addr.sin_addr) != 1) {
      ::close(listen_fd_);
      throw Error(ErrorCode::kTransport, "bind address must be an IPv4 literal: " + bind_to.host);
    }
    if (::bind(listen_fd_, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0 ||
        ::listen(listen_fd_, 64) != 0) {
      const std::string why = std::strerror(errno);
      ::close(listen_fd_);
      throw Error(ErrorCode::kTransport, "cannot bind " + bind_to.ToString() + ": " + why);
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    endpoint_ = Endpoint{bind_to.host, ntohs(addr.sin_port)};
    accept_thread_ = std::thread([this] { AcceptLoop(); });
  }

  ~TcpServer() { Stop(); }
  TcpServer(const TcpServer&) = delete;
  TcpServer& operator=(const TcpServer&) = delete;

  const Endpoint& endpoint() const { return endpoint_; }

  void Stop() {
    if (stopping_.exchange(true)) return;
    ::shutdown(listen_fd_, SHUT_RDWR);
    if (accept_thread_.joinable()) accept_thread_.join();
    ::close(listen_fd_);
    std::list<Connection> conns;
    {
      std::lock_guard<std::mutex> lock(mu_);
      for (Connection& c : connections_) ::shutdown(c.fd, SHUT_RDWR);
      conns.swap(connections_);
    }
    for (Connection& c : conns) {
      c.thread.join();
      ::close(c.fd);
    }
  }

  // Blocks until Stop() is called from another thread.
  void Wait() {
    while (!stopping_) std::this_thread::sleep_for(std::chrono::milliseconds(200));
  }

 private:
  struct Connection {
    int fd;
    std::thread thread;
  };

  void AcceptLoop() {
    while (!stopping_) {
      pollfd p{listen_fd_, POLLIN, 0};
      const int ready = ::poll(&p, 1, 100);
      if (ready <= 0 || stopping_) continue;
      const int fd = ::accept(listen_fd_, nullptr, nullptr);
      if (fd < 0) continue;
      int one = 1;
      ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      std::lock_guard<std::mutex> lock(mu_);
      if (stopping_) {
        ::close(fd);
        break;
      }
      connections_.push_back(Connection{fd, std::thread([this, fd] { Serve(fd); })});
    }
  }

  void Serve(int fd) {
    try {
      while (true) {
        std::vector<std::uint8_t> request;
        try {
          request = net::ReadFrameBytes(fd);
        } catch (const Error& e) {
          // The length cannot be trusted, so the stream cannot be resynced.
          if (e.code() == ErrorCode::kFormat)
            net::SendAll(fd, EncodeFrame(MakeErrorFrame(std::string("format: ") + e.what())));
          return;
        }
        if (request.empty()) return;
        net::SendAll(fd, handler_(request));
      }
    } catch (const Error&) {
      // Peer went away.
    }
  }

  FrameHandler handler_;
  int listen_fd_ = -1;
  Endpoint endpoint_;
  std::atomic<bool> stopping_{false};
  std::thread accept_thread_;
  std::mutex mu_;
  std::list<Connection> connections_;
};

}  // namespace snd

#endif  // SND_PROTOCOL_TCP_HPP_
