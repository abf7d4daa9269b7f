// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "parex/app.hpp"
#include "parex/value.hpp"

namespace parex {

/// A dispatched task attempt, fully resolved (no FutureRefs).
struct TaskEnvelope {
  std::uint64_t task_id = 0;
  int attempt = 0;
  AppSpec app;
  ValueList args;
  ValueMap kwargs;
};

/// Delivered by the executor when an attempt finishes, from any thread.
struct CompletionInfo {
  std::uint64_t task_id = 0;
  int attempt = 0;
  Outcome outcome;
  std::int64_t exec_start_us = 0;  // monotonic, worker-side
  std::int64_t exec_end_us = 0;
  std::string manager_id;
  int worker_index = -1;
};

using CompletionHandler = std::function<void(CompletionInfo)>;

enum class ExecutorStatus { Starting, Running, Draining, Stopped };

struct ExecutorShutdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct BlockStatusInfo {
  std::string block_id;
  std::string state;  // Requested/Queued/Active/Terminating/Done/Failed
  int nodes = 0;
};

/// One strategy-tick view of an executor, read atomically per tick.
struct LoadSnapshot {
  std::size_t outstanding_tasks = 0;
  std::size_t active_slots = 0;
  std::size_t active_blocks = 0;
  std::size_t pending_blocks = 0;  // Requested or Queued
  // (block_id, idle age in us) for blocks with no outstanding work.
  std::vector<std::pair<std::string, std::int64_t>> idle_block_ages;
};

class SinkIface;

/// Pluggable transport between the kernel and workers. submit_task must not
/// block on task completion; completions arrive through the handler on
/// whatever thread the executor uses internally.
class Executor {
 public:
  explicit Executor(std::string label) : label_(std::move(label)) {}
  virtual ~Executor() = default;

  const std::string& label() const { return label_; }

  /// Lets the executor report manager/block lifecycle into the run's monitor
  /// log; timestamps are monotonic_us() - t0_us.
  virtual void attach_monitor(SinkIface* sink, std::int64_t t0_us) {
    (void)sink;
    (void)t0_us;
  }

  virtual void start() = 0;
  virtual void submit_task(TaskEnvelope env) = 0;
  virtual std::size_t pending_count() const = 0;
  virtual ExecutorStatus status() const = 0;
  virtual void shutdown() = 0;

  virtual bool supports_scaling() const { return false; }
  virtual int scale_out(int blocks) { (void)blocks; return 0; }
  virtual int scale_in(const std::vector<std::string>& block_ids) {
    (void)block_ids;
    return 0;
  }
  virtual LoadSnapshot load_snapshot() { return {}; }
  virtual std::vector<BlockStatusInfo> blocks() const { return {}; }

  void set_completion_handler(CompletionHandler h) { on_complete_ = std::move(h); }

 protected:
  void deliver(CompletionInfo info) {
    if (on_complete_) on_complete_(std::move(info));
  }

  std::string label_;
  CompletionHandler on_complete_;
};

}  // namespace parex
