// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace parex {

struct RelayConfig {
  std::uint16_t client_port = 0;
  std::uint16_t worker_port = 0;
};

/// Low-latency relay: forwards task frames from clients to directly
/// connected idle workers and result frames back by client identity. Keeps
/// no per-task state — just a per-connection idle/busy bit and a buffer of
/// not-yet-routable frames — so a worker that silently dies takes its frame
/// with it (clients recover via timed retries). Prints
/// "PAREX_LLEX client=<port> worker=<port>" once listening.
int run_llex_relay(const RelayConfig& cfg);

struct LlexWorkerConfig {
  std::string relay_host = "127.0.0.1";
  std::uint16_t relay_port = 0;
  std::string sandbox_root = "/tmp/parex-llex";
  int index = 0;
  bool drop_frames = false;  // fault injection: swallow every task
};

/// Single-task-at-a-time worker connected straight to the relay.
int run_llex_worker(const LlexWorkerConfig& cfg);

}  // namespace parex
