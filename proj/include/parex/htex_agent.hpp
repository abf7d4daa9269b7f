// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

namespace parex {

// Process entry points for the high-throughput executor's moving parts. The
// executor client spawns the interchange; providers spawn managers; managers
// spawn their workers. Everything talks length-framed codec maps over TCP
// (workers: a socketpair inherited across exec).

struct InterchangeConfig {
  std::uint16_t task_port = 0;  // 0 picks an ephemeral port
  std::uint16_t cmd_port = 0;
  int heartbeat_period_ms = 2000;
  int heartbeat_threshold_ms = 6000;
  int batch_size_max = 128;
  std::uint64_t seed = 1;
};

/// Broker between the executor client and managers: queues tasks, matches
/// them to advertised capacity with randomized fairness, relays result
/// batches, exchanges heartbeats, and answers the synchronous command
/// channel. Prints "PAREX_IX task=<port> cmd=<port>" on stdout once
/// listening. Runs until a SHUTDOWN command (exit 0) or client disconnect.
int run_interchange(const InterchangeConfig& cfg);

struct ManagerAgentConfig {
  std::string interchange_host = "127.0.0.1";
  std::uint16_t interchange_port = 0;
  int workers = 1;
  int prefetch = 0;
  int heartbeat_period_ms = 2000;
  int heartbeat_threshold_ms = 6000;
  std::string sandbox_root = "/tmp/parex-sandbox";
  std::string manager_id;  // generated when empty
  std::string block_id;    // defaults to $PAREX_BLOCK_ID
  std::string agent_path;  // worker binary; defaults to /proc/self/exe
};

/// Per-node pilot agent: registers capacity with the interchange, starts
/// `workers` worker processes, feeds them tasks, aggregates results into
/// batches, and heartbeats. Exits immediately when the interchange vanishes
/// (EOF -> exit 2, heartbeat silence past the threshold -> exit 3) so no
/// resources idle on a dead run.
int run_manager(const ManagerAgentConfig& cfg);

/// Single worker process: executes one task at a time received over `fd`.
int run_worker(int fd, int index, const std::string& sandbox_root);

/// Random 16-hex-char identifier.
std::string random_id();

}  // namespace parex
