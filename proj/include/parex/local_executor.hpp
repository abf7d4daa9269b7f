// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <memory>
#include <mutex>
#include <thread>
#include <vector>

#include "parex/exec_kernel.hpp"
#include "parex/executor.hpp"

namespace parex {

/// In-process thread-pool executor for single-node runs. FIFO dispatch over
/// `workers` threads sharing one execution kernel.
class LocalExecutor : public Executor {
 public:
  LocalExecutor(std::string label, int workers, std::string sandbox_root);
  ~LocalExecutor() override;

  void start() override;
  void submit_task(TaskEnvelope env) override;
  std::size_t pending_count() const override;
  ExecutorStatus status() const override;
  void shutdown() override;
  LoadSnapshot load_snapshot() override;
  void attach_monitor(SinkIface* sink, std::int64_t t0_us) override;

  int workers() const { return workers_n_; }

 private:
  void worker_loop(int index);

  int workers_n_;
  ExecutionKernel kernel_;
  mutable std::mutex mu_;
  std::condition_variable cv_;
  std::deque<TaskEnvelope> queue_;
  std::size_t in_flight_ = 0;
  std::vector<std::thread> threads_;
  std::atomic<ExecutorStatus> status_{ExecutorStatus::Starting};
  bool stop_ = false;
  SinkIface* monitor_ = nullptr;
  std::int64_t monitor_t0_us_ = 0;
};

}  // namespace parex
