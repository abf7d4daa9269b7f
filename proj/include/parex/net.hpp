// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <poll.h>

#include <cstdint>
#include <deque>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "parex/codec.hpp"
#include "parex/value.hpp"

namespace parex::net {

struct NetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Every message among client, interchange, managers, and workers is a frame:
// a 4-byte big-endian length followed by one codec-encoded map that carries a
// mandatory "type" field.

/// Encoded frame bytes for a message map.
std::string pack_frame(const ValueMap& msg);

ValueMap msg_of(const std::string& type);

int listen_tcp(std::uint16_t port, std::uint16_t* bound_port);
int connect_tcp(const std::string& host, std::uint16_t port, int timeout_ms = 5000);
int accept_conn(int listen_fd);  // -1 if none pending
void set_nonblocking(int fd, bool on);
void close_fd(int fd);

/// Blocking send of a whole frame. Throws NetError on a closed peer.
void send_frame_blocking(int fd, const ValueMap& msg);

/// Blocking read of one frame; nullopt on clean EOF; throws on timeout
/// (timeout_ms >= 0) or error.
std::optional<ValueMap> recv_frame_blocking(int fd, int timeout_ms = -1);

/// Nonblocking buffered frame stream over one socket, for poll loops.
/// Owns the fd.
class FrameConn {
 public:
  explicit FrameConn(int fd);
  ~FrameConn();
  FrameConn(const FrameConn&) = delete;
  FrameConn& operator=(const FrameConn&) = delete;

  int fd() const { return fd_; }

  /// Reads whatever is available. Returns false once the peer is gone.
  bool pump_recv();

  /// Pops the next complete frame, if any.
  std::optional<ValueMap> next_frame();

  /// Queues a frame and opportunistically flushes.
  void send(const ValueMap& msg);

  /// Flushes queued bytes; returns true when the send buffer is drained.
  bool pump_send();

  bool wants_send() const { return !sendbuf_.empty(); }
  bool closed() const { return closed_; }

 private:
  int fd_ = -1;
  bool closed_ = false;
  std::string recvbuf_;
  std::string sendbuf_;
};

/// Thin poll() wrapper for single-threaded routing loops.
class Poller {
 public:
  void clear() { fds_.clear(); }
  void add(int fd, short events) { fds_.push_back(pollfd{fd, events, 0}); }
  /// Returns revents-filled pollfds (empty on timeout).
  const std::vector<pollfd>& wait(int timeout_ms);

 private:
  std::vector<pollfd> fds_;
};

}  // namespace parex::net
