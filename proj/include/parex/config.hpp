// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "parex/elasticity.hpp"
#include "parex/kernel.hpp"

namespace parex {

/// Configuration error; message names the offending field path.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct LauncherEntry {
  std::string kind = "single";  // single | per_node
  int agents_per_node = 1;
};

struct ProviderEntry {
  std::string type = "local";  // local | sim
  int nodes_per_block = 1;
  int init_blocks = 1;
  std::string partition = "sim";
  int walltime_ms = 0;
  int queue_delay_min_ms = 0;
  int queue_delay_max_ms = 0;
  double failure_rate = 0.0;
  int max_active_blocks = 64;
  LauncherEntry launcher;
};

struct ExecutorEntry {
  std::string label;
  std::string type = "local";  // local | htex | llex
  int workers = 1;             // threads (local), workers_per_node (htex), pool (llex)
  int prefetch = 0;
  int batch_size_max = 128;
  int heartbeat_period_ms = 2000;
  int heartbeat_threshold_ms = 6000;
  int replication_factor = 1;
  int task_timeout_ms = 0;
  int max_timed_retries = 0;
  ProviderEntry provider;
};

struct StrategyEntry {
  bool enabled = false;
  double parallelism = 1.0;
  int poll_period_ms = 1000;
  int idle_timeout_ms = 10000;
  int min_blocks = 0;
  int max_blocks = 8;
};

/// Declarative run configuration, kept apart from program logic: the same
/// program runs under any config.
struct RunConfig {
  std::vector<ExecutorEntry> executors;
  StrategyEntry strategy;
  bool checkpointing = false;
  std::vector<std::string> checkpoint_files;
  int retries = 0;
  std::string monitor_log;
  std::uint64_t seed = 1;
  std::optional<std::int64_t> task_timeout_ms;
  std::string sandbox_root;
};

RunConfig parse_config(const std::string& json_text);
RunConfig load_config_file(const std::string& path);
std::string serialize_config(const RunConfig& cfg);
void validate_config(const RunConfig& cfg);

/// A ready-to-run engine wired per config: executors (with providers),
/// monitor sink, checkpointing, and strategy loops for scalable executors.
struct BuiltEngine {
  std::unique_ptr<Engine> engine;
  std::vector<std::unique_ptr<StrategyLoop>> strategies;

  void start_strategies() {
    for (auto& s : strategies) s->start();
  }
  void stop() {
    strategies.clear();
    if (engine) engine->shutdown();
  }
};

BuiltEngine build_engine(const RunConfig& cfg, const std::string& run_id = "run");

}  // namespace parex
