// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>

#include "parex/executor.hpp"
#include "parex/monitor.hpp"
#include "parex/providers.hpp"

namespace parex {

struct HtexConfig {
  std::string label = "htex";
  int workers_per_node = 1;
  int prefetch_capacity = 0;
  int heartbeat_period_ms = 2000;
  int heartbeat_threshold_ms = 6000;  // must exceed the period
  int batch_size_max = 128;
  int nodes_per_block = 1;
  int init_blocks = 1;
  std::string sandbox_root;  // defaults to a temp dir
  std::string agent_path;    // defaults to $PAREX_AGENT or ./parex-agent
  std::uint64_t seed = 1;
};

/// High-Throughput Executor client. Owns an interchange process, feeds it
/// task batches, and turns result/lost frames back into completions. Blocks
/// of managers come and go through the provider; scaling works in whole
/// blocks.
class HtexExecutor : public Executor {
 public:
  HtexExecutor(HtexConfig cfg, std::shared_ptr<Provider> provider);
  ~HtexExecutor() override;

  void start() override;
  void submit_task(TaskEnvelope env) override;
  std::size_t pending_count() const override;
  ExecutorStatus status() const override { return status_.load(); }
  void shutdown() override;

  bool supports_scaling() const override { return true; }
  int scale_out(int blocks) override;
  int scale_in(const std::vector<std::string>& block_ids) override;
  LoadSnapshot load_snapshot() override;
  std::vector<BlockStatusInfo> blocks() const override;

  void attach_monitor(SinkIface* sink, std::int64_t t0_us) override;

  /// Synchronous administrative exchange on the command channel.
  ValueMap command(ValueMap cmd);
  std::map<std::string, std::int64_t> outstanding_per_manager();
  bool blacklist_manager(const std::string& manager_id);

  /// Waits until at least `slots` worker slots are registered.
  bool wait_for_capacity(int slots, int timeout_ms);
  std::int64_t connected_slots();

  pid_t interchange_pid() const { return ix_pid_; }
  Provider& provider() { return *provider_; }
  const HtexConfig& config() const { return cfg_; }

 private:
  void io_loop();
  void handle_frame(const ValueMap& msg);
  void deliver_completion(CompletionInfo info);
  std::vector<std::string> manager_argv() const;
  void note_manager(const std::string& event, const ValueMap& msg);

  HtexConfig cfg_;
  std::shared_ptr<Provider> provider_;

  pid_t ix_pid_ = -1;
  std::uint16_t task_port_ = 0, cmd_port_ = 0;
  int task_fd_ = -1;
  int cmd_fd_ = -1;
  std::mutex cmd_mu_;

  std::thread io_thread_;
  int wake_pipe_[2] = {-1, -1};
  std::mutex outbox_mu_;
  std::vector<TaskEnvelope> outbox_;
  std::atomic<bool> stop_{false};
  std::atomic<ExecutorStatus> status_{ExecutorStatus::Starting};
  std::atomic<std::size_t> pending_{0};

  struct BlockTrack {
    std::set<std::string> managers;
    std::int64_t last_nonidle_us = 0;
  };
  mutable std::mutex track_mu_;
  std::map<std::string, BlockTrack> tracked_blocks_;           // by provider handle
  std::map<std::string, std::string> manager_block_;           // manager -> block
  std::map<std::string, std::int64_t> manager_capacity_;

  SinkIface* monitor_ = nullptr;
  std::int64_t monitor_t0_us_ = 0;
};

}  // namespace parex
