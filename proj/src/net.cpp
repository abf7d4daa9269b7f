// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/net.hpp"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "parex/clock.hpp"

namespace parex::net {

std::string pack_frame(const ValueMap& msg) {
  std::string body = encode(Value(msg));
  std::string frame;
  frame.reserve(body.size() + 4);
  put_u32(frame, static_cast<std::uint32_t>(body.size()));
  frame += body;
  return frame;
}

ValueMap msg_of(const std::string& type) {
  ValueMap m;
  m["type"] = Value(type);
  return m;
}

int listen_tcp(std::uint16_t port, std::uint16_t* bound_port) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw NetError(std::string("socket: ") + std::strerror(errno));
  int one = 1;
  ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);
  addr.sin_port = htons(port);
  if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr)) != 0) {
    ::close(fd);
    throw NetError(std::string("bind: ") + std::strerror(errno));
  }
  if (::listen(fd, 256) != 0) {
    ::close(fd);
    throw NetError(std::string("listen: ") + std::strerror(errno));
  }
  set_nonblocking(fd, true);  // accept loops run inside poll loops
  if (bound_port) {
    sockaddr_in got{};
    socklen_t len = sizeof(got);
    ::getsockname(fd, reinterpret_cast<sockaddr*>(&got), &len);
    *bound_port = ntohs(got.sin_port);
  }
  return fd;
}

int connect_tcp(const std::string& host, std::uint16_t port, int timeout_ms) {
  int fd = ::socket(AF_INET, SOCK_STREAM, 0);
  if (fd < 0) throw NetError(std::string("socket: ") + std::strerror(errno));
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1)
    addr.sin_addr.s_addr = htonl(INADDR_LOOPBACK);

  set_nonblocking(fd, true);
  int rc = ::connect(fd, reinterpret_cast<sockaddr*>(&addr), sizeof(addr));
  if (rc != 0 && errno != EINPROGRESS) {
    ::close(fd);
    throw NetError(std::string("connect: ") + std::strerror(errno));
  }
  if (rc != 0) {
    pollfd p{fd, POLLOUT, 0};
    rc = ::poll(&p, 1, timeout_ms);
    int err = 0;
    socklen_t len = sizeof(err);
    ::getsockopt(fd, SOL_SOCKET, SO_ERROR, &err, &len);
    if (rc <= 0 || err != 0) {
      ::close(fd);
      throw NetError("connect to " + host + ":" + std::to_string(port) + " failed: " +
                     (rc <= 0 ? "timeout" : std::strerror(err)));
    }
  }
  set_nonblocking(fd, false);
  int one = 1;
  ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return fd;
}

int accept_conn(int listen_fd) {
  int fd = ::accept(listen_fd, nullptr, nullptr);
  if (fd >= 0) {
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  }
  return fd;
}

void set_nonblocking(int fd, bool on) {
  int flags = ::fcntl(fd, F_GETFL, 0);
  if (on)
    ::fcntl(fd, F_SETFL, flags | O_NONBLOCK);
  else
    ::fcntl(fd, F_SETFL, flags & ~O_NONBLOCK);
}

void close_fd(int fd) {
  if (fd >= 0) ::close(fd);
}

void send_frame_blocking(int fd, const ValueMap& msg) {
  std::string frame = pack_frame(msg);
  std::size_t off = 0;
  while (off < frame.size()) {
    ssize_t n = ::send(fd, frame.data() + off, frame.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) continue;
      if (errno == EAGAIN || errno == EWOULDBLOCK) {
        pollfd p{fd, POLLOUT, 0};
        ::poll(&p, 1, 1000);
        continue;
      }
      throw NetError(std::string("send: ") + std::strerror(errno));
    }
    off += std::size_t(n);
  }
}

namespace {

bool recv_exact(int fd, char* buf, std::size_t n, int timeout_ms) {
  std::size_t off = 0;
  std::int64_t deadline =
      timeout_ms >= 0 ? monotonic_us() + std::int64_t(timeout_ms) * 1000 : 0;
  while (off < n) {
    if (timeout_ms >= 0) {
      std::int64_t left_us = deadline - monotonic_us();
      if (left_us <= 0) throw NetError("recv timeout");
      pollfd p{fd, POLLIN, 0};
      int rc = ::poll(&p, 1, int(left_us / 1000) + 1);
      if (rc == 0) throw NetError("recv timeout");
      if (rc < 0 && errno != EINTR) throw NetError("poll failed");
      if (rc <= 0) continue;
    }
    ssize_t r = ::recv(fd, buf + off, n - off, 0);
    if (r == 0) {
      if (off == 0) return false;  // clean EOF at a frame boundary
      throw NetError("peer closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR || errno == EAGAIN) continue;
      throw NetError(std::string("recv: ") + std::strerror(errno));
    }
    off += std::size_t(r);
  }
  return true;
}

}  // namespace

std::optional<ValueMap> recv_frame_blocking(int fd, int timeout_ms) {
  char hdr[4];
  if (!recv_exact(fd, hdr, 4, timeout_ms)) return std::nullopt;
  std::uint32_t len = get_u32(reinterpret_cast<unsigned char*>(hdr));
  if (len > (64u << 20)) throw NetError("oversized frame");
  std::string body(len, '\0');
  if (len > 0 && !recv_exact(fd, body.data(), len, timeout_ms))
    throw NetError("peer closed mid-frame");
  Value v = decode(body);
  if (!v.is<ValueMap>()) throw NetError("frame is not a map");
  return v.as_map();
}

FrameConn::FrameConn(int fd) : fd_(fd) { set_nonblocking(fd_, true); }

FrameConn::~FrameConn() { close_fd(fd_); }

bool FrameConn::pump_recv() {
  if (closed_) return false;
  char buf[1 << 16];
  for (;;) {
    ssize_t n = ::recv(fd_, buf, sizeof(buf), 0);
    if (n > 0) {
      recvbuf_.append(buf, std::size_t(n));
      if (std::size_t(n) < sizeof(buf)) return true;
      continue;
    }
    if (n == 0) {
      closed_ = true;
      return false;
    }
    if (errno == EAGAIN || errno == EWOULDBLOCK) return true;
    if (errno == EINTR) continue;
    closed_ = true;
    return false;
  }
}

std::optional<ValueMap> FrameConn::next_frame() {
  if (recvbuf_.size() < 4) return std::nullopt;
  std::uint32_t len = get_u32(reinterpret_cast<const unsigned char*>(recvbuf_.data()));
  if (len > (64u << 20)) {
    closed_ = true;
    return std::nullopt;
  }
  if (recvbuf_.size() < 4 + std::size_t(len)) return std::nullopt;
  std::string body = recvbuf_.substr(4, len);
  recvbuf_.erase(0, 4 + std::size_t(len));
  try {
    Value v = decode(body);
    if (!v.is<ValueMap>()) throw DecodeError("frame is not a map");
    return v.as_map();
  } catch (const DecodeError&) {
    closed_ = true;
    return std::nullopt;
  }
}

void FrameConn::send(const ValueMap& msg) {
  if (closed_) return;
  sendbuf_ += pack_frame(msg);
  pump_send();
}

bool FrameConn::pump_send() {
  if (closed_) return true;
  while (!sendbuf_.empty()) {
    ssize_t n = ::send(fd_, sendbuf_.data(), sendbuf_.size(), MSG_NOSIGNAL);
    if (n > 0) {
      sendbuf_.erase(0, std::size_t(n));
      continue;
    }
    if (n < 0 && (errno == EAGAIN || errno == EWOULDBLOCK)) return false;
    if (n < 0 && errno == EINTR) continue;
    closed_ = true;
    return true;
  }
  return true;
}

const std::vector<pollfd>& Poller::wait(int timeout_ms) {
  static thread_local std::vector<pollfd> empty;
  if (fds_.empty()) {
    if (timeout_ms > 0) sleep_ms(timeout_ms);
    return empty;
  }
  int rc = ::poll(fds_.data(), fds_.size(), timeout_ms);
  if (rc < 0) {
    for (auto& p : fds_) p.revents = 0;
  }
  return fds_;
}

}  // namespace parex::net
