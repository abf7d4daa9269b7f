// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <thread>

#include "parex/executor.hpp"
#include "parex/providers.hpp"

namespace parex {

struct LlexConfig {
  std::string label = "llex";
  int workers = 1;                 // fixed pool, pre-launched at start
  int replication_factor = 1;      // copies sent per attempt
  int task_timeout_ms = 0;         // 0 disables timed retries
  int max_timed_retries = 0;
  std::string sandbox_root;
  std::string agent_path;
};

/// Low-Latency Executor client. The relay holds no task state, so this side
/// owns reliability: each submission fans out replication_factor copies, the
/// first result wins, duplicates are discarded, and silence beyond
/// task_timeout_ms triggers a resend (up to max_timed_retries) before the
/// task fails with a timeout. Apps routed here must be idempotent — copies
/// of one task may execute more than once.
class LlexExecutor : public Executor {
 public:
  LlexExecutor(LlexConfig cfg, std::shared_ptr<Provider> provider);
  ~LlexExecutor() override;

  void start() override;
  void submit_task(TaskEnvelope env) override;
  std::size_t pending_count() const override;
  ExecutorStatus status() const override { return status_.load(); }
  void shutdown() override;
  LoadSnapshot load_snapshot() override;

  /// Relay introspection (CMD INTROSPECT): buffered_tasks, busy_workers,
  /// idle_workers, task_records.
  ValueMap introspect();

  bool wait_for_workers(int count, int timeout_ms);

  std::uint16_t worker_port() const { return worker_port_; }
  std::size_t duplicates_discarded() const { return duplicates_.load(); }
  const LlexConfig& config() const { return cfg_; }
  std::int64_t last_result_hops() const { return last_hops_.load(); }

 private:
  void io_loop();
  void send_copies(const TaskEnvelope& env, int retry);
  void handle_result(const ValueMap& msg);
  void check_deadlines();

  LlexConfig cfg_;
  std::shared_ptr<Provider> provider_;

  pid_t relay_pid_ = -1;
  std::uint16_t client_port_ = 0, worker_port_ = 0;
  int fd_ = -1;
  std::mutex send_mu_;

  struct PendingAttempt {
    TaskEnvelope env;
    std::int64_t deadline_us = 0;
    int retries_left = 0;
    bool done = false;
    std::int64_t expire_us = 0;  // entry GC: 2x timeout after completion
  };
  std::mutex pending_mu_;
  // Keyed by (task_id, kernel attempt); replicas/retries share the entry.
  std::map<std::pair<std::uint64_t, int>, PendingAttempt> pending_;

  std::thread io_thread_;
  std::atomic<bool> stop_{false};
  std::atomic<ExecutorStatus> status_{ExecutorStatus::Starting};
  std::atomic<std::size_t> in_flight_{0};
  std::atomic<std::size_t> duplicates_{0};
  std::atomic<std::int64_t> last_hops_{0};
};

}  // namespace parex
