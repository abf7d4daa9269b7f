// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sys/types.h>

#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <thread>
#include <vector>

#include "parex/proc.hpp"

namespace parex {

/// Smallest unit of acquired resources: one provider request for one or more
/// nodes. Scaling happens in whole blocks.
enum class BlockState { Requested, Queued, Active, Terminating, Done, Failed };

const char* block_state_name(BlockState s);
bool block_transition_legal(BlockState from, BlockState to);

/// How a worker launch command expands across the nodes of a block: one
/// command for the whole block, or n agents per node, each tagged with rank
/// env vars (PAREX_AGENT_INDEX, PAREX_NODE_INDEX).
struct LauncherSpec {
  enum class Kind { Single, PerNode };
  Kind kind = Kind::Single;
  int agents_per_node = 1;
};

struct LaunchCommand {
  std::vector<std::string> argv;
  std::map<std::string, std::string> env;
};

std::vector<LaunchCommand> render_launch(const std::vector<std::string>& argv,
                                         const LauncherSpec& launcher, int nodes);

/// Uniform acquire/status/cancel interface over resource backends.
class Provider {
 public:
  virtual ~Provider() = default;

  /// Requests one block running `argv` (expanded by the configured launcher)
  /// across nodes_per_block nodes. Returns the job handle.
  virtual std::string submit(const std::vector<std::string>& argv, int nodes_per_block,
                             const std::map<std::string, std::string>& env = {}) = 0;
  virtual BlockState status(const std::string& handle) = 0;
  /// Idempotent; a handle may be cancelled any number of times.
  virtual void cancel(const std::string& handle) = 0;

  /// Live agent pids for a block (empty once it is down). Lets tests and the
  /// executor reason about the real process tree.
  virtual std::vector<pid_t> block_pids(const std::string& handle) = 0;

  virtual std::vector<std::string> handles() const = 0;
};

/// Direct fork/exec on the local host; every submit starts its process tree
/// immediately.
class LocalProvider : public Provider {
 public:
  explicit LocalProvider(LauncherSpec launcher = {});
  ~LocalProvider() override;

  std::string submit(const std::vector<std::string>& argv, int nodes_per_block,
                     const std::map<std::string, std::string>& env = {}) override;
  BlockState status(const std::string& handle) override;
  void cancel(const std::string& handle) override;
  std::vector<pid_t> block_pids(const std::string& handle) override;
  std::vector<std::string> handles() const override;

  /// History of states each block has passed through (for invariant checks).
  std::vector<BlockState> state_history(const std::string& handle) const;

 private:
  struct BlockRec {
    std::vector<pid_t> pids;
    BlockState state = BlockState::Requested;
    std::vector<BlockState> history{BlockState::Requested};
    bool cancelled = false;
  };
  void transition(BlockRec& b, BlockState to);
  void refresh(BlockRec& b);

  LauncherSpec launcher_;
  mutable std::mutex mu_;
  std::map<std::string, BlockRec> blocks_;
  int next_id_ = 0;
};

struct SimLrmConfig {
  // Sampled uniformly in [min,max]; set both equal for a fixed delay.
  int queue_delay_min_ms = 0;
  int queue_delay_max_ms = 0;
  int max_active_blocks = 64;
  double failure_rate = 0.0;  // per-block probability of Failed instead of Active
  int walltime_ms = 0;        // 0 = unlimited; lease after which the block is killed
  std::string partition = "sim";
  std::uint64_t seed = 1;
};

/// Batch-scheduler stand-in: blocks wait in a queue for a sampled delay (and
/// for a free slot under max_active_blocks) before their processes start;
/// some fraction fail outright; leases expire after walltime.
class SimLrmProvider : public Provider {
 public:
  explicit SimLrmProvider(SimLrmConfig cfg, LauncherSpec launcher = {});
  ~SimLrmProvider() override;

  std::string submit(const std::vector<std::string>& argv, int nodes_per_block,
                     const std::map<std::string, std::string>& env = {}) override;
  BlockState status(const std::string& handle) override;
  void cancel(const std::string& handle) override;
  std::vector<pid_t> block_pids(const std::string& handle) override;
  std::vector<std::string> handles() const override;
  std::vector<BlockState> state_history(const std::string& handle) const;

 private:
  struct BlockRec {
    std::vector<std::string> argv;
    std::map<std::string, std::string> env;
    int nodes = 1;
    std::vector<pid_t> pids;
    BlockState state = BlockState::Requested;
    std::vector<BlockState> history{BlockState::Requested};
    std::int64_t eligible_at_us = 0;  // queue delay expiry
    std::int64_t lease_end_us = 0;
    bool doomed = false;  // sampled failure
    bool cancelled = false;
  };
  void transition(BlockRec& b, BlockState to);
  void tick();
  std::size_t active_count_locked() const;

  SimLrmConfig cfg_;
  LauncherSpec launcher_;
  mutable std::mutex mu_;
  std::map<std::string, BlockRec> blocks_;
  std::mt19937_64 rng_;
  int next_id_ = 0;
  std::thread ticker_;
  bool stop_ = false;
};

/// How the engine reaches a provider host. Only direct local spawning is
/// implemented; remote shells would slot in behind the same interface.
class Channel {
 public:
  virtual ~Channel() = default;
  virtual pid_t execute(const std::vector<std::string>& argv, const SpawnOptions& opts) = 0;
};

class LocalChannel : public Channel {
 public:
  pid_t execute(const std::vector<std::string>& argv, const SpawnOptions& opts) override {
    return spawn_process(argv, opts);
  }
};

}  // namespace parex
