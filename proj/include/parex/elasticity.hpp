// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <string>
#include <thread>
#include <vector>

#include "parex/executor.hpp"

namespace parex {

struct StrategyConfig {
  double parallelism = 1.0;  // in (0,1]: how aggressively capacity chases load
  int poll_period_ms = 1000;
  int idle_timeout_ms = 10000;
  int min_blocks = 0;
  int max_blocks = 8;
  int init_blocks = 1;
  int slots_per_block = 1;  // task slots one block contributes

  void validate() const;
};

struct ScalingDecision {
  enum class Kind { None, ScaleOut, ScaleIn };
  Kind kind = Kind::None;
  int out_blocks = 0;
  std::vector<std::string> in_blocks;
};

/// One controller step: required = clamp(ceil(outstanding * parallelism /
/// slots_per_block), min_blocks, max_blocks). Below that, grow by the
/// difference; otherwise shrink blocks that have idled past idle_timeout
/// (never both in one tick, and never below min_blocks or current need).
ScalingDecision strategy_tick(const LoadSnapshot& snap, const StrategyConfig& cfg);

struct ScalingEvent {
  std::int64_t timestamp_us = 0;
  std::string decision;  // "none", "scale_out n", "scale_in id,..."
  std::size_t outstanding = 0;
  std::size_t active_blocks = 0;
  std::size_t pending_blocks = 0;
};

/// Periodically snapshots an executor and applies scaling decisions through
/// it. Optionally appends line-delimited events (timestamp_us, decision,
/// outstanding, active_blocks, pending_blocks) to `event_log_path`.
class StrategyLoop {
 public:
  StrategyLoop(Executor& executor, StrategyConfig cfg, std::string event_log_path = "");
  ~StrategyLoop();

  void start();
  void stop();

  std::vector<ScalingEvent> events() const;

 private:
  void run();
  void record(const ScalingDecision& d, const LoadSnapshot& snap);

  Executor& executor_;
  StrategyConfig cfg_;
  std::string log_path_;
  std::FILE* log_ = nullptr;
  std::thread thread_;
  std::atomic<bool> stop_{false};
  mutable std::mutex mu_;
  std::vector<ScalingEvent> events_;
};

}  // namespace parex
