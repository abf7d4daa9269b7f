// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/providers.hpp"

#include <algorithm>

#include "parex/clock.hpp"

namespace parex {

const char* block_state_name(BlockState s) {
  switch (s) {
    case BlockState::Requested: return "Requested";
    case BlockState::Queued: return "Queued";
    case BlockState::Active: return "Active";
    case BlockState::Terminating: return "Terminating";
    case BlockState::Done: return "Done";
    case BlockState::Failed: return "Failed";
  }
  return "?";
}

bool block_transition_legal(BlockState from, BlockState to) {
  using B = BlockState;
  switch (from) {
    case B::Requested: return to == B::Queued || to == B::Failed;
    case B::Queued: return to == B::Active || to == B::Failed || to == B::Terminating;
    case B::Active: return to == B::Terminating || to == B::Done || to == B::Failed;
    case B::Terminating: return to == B::Done;
    case B::Done:
    case B::Failed: return false;
  }
  return false;
}

std::vector<LaunchCommand> render_launch(const std::vector<std::string>& argv,
                                         const LauncherSpec& launcher, int nodes) {
  std::vector<LaunchCommand> out;
  if (nodes < 1) nodes = 1;
  if (launcher.kind == LauncherSpec::Kind::Single) {
    LaunchCommand c;
    c.argv = argv;
    c.env["PAREX_AGENT_INDEX"] = "0";
    c.env["PAREX_NODE_INDEX"] = "0";
    c.env["PAREX_NODES"] = std::to_string(nodes);
    out.push_back(std::move(c));
    return out;
  }
  int per_node = std::max(1, launcher.agents_per_node);
  for (int node = 0; node < nodes; ++node) {
    for (int a = 0; a < per_node; ++a) {
      LaunchCommand c;
      c.argv = argv;
      int index = node * per_node + a;
      c.env["PAREX_AGENT_INDEX"] = std::to_string(index);
      c.env["PAREX_NODE_INDEX"] = std::to_string(node);
      c.env["PAREX_NODES"] = std::to_string(nodes);
      out.push_back(std::move(c));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// LocalProvider

LocalProvider::LocalProvider(LauncherSpec launcher) : launcher_(launcher) {}

LocalProvider::~LocalProvider() {
  std::vector<std::string> hs = handles();
  for (const auto& h : hs) cancel(h);
}

void LocalProvider::transition(BlockRec& b, BlockState to) {
  if (b.state == to) return;
  b.state = to;
  b.history.push_back(to);
}

std::string LocalProvider::submit(const std::vector<std::string>& argv, int nodes_per_block,
                                  const std::map<std::string, std::string>& env) {
  std::lock_guard lk(mu_);
  std::string handle = "local-" + std::to_string(next_id_++);
  BlockRec rec;
  transition(rec, BlockState::Queued);
  for (auto& cmd : render_launch(argv, launcher_, nodes_per_block)) {
    SpawnOptions opts;
    opts.env = cmd.env;
    for (const auto& [k, v] : env) opts.env[k] = v;
    opts.env["PAREX_BLOCK_ID"] = handle;
    opts.kill_on_parent_death = true;
    rec.pids.push_back(spawn_process(cmd.argv, opts));
  }
  transition(rec, BlockState::Active);
  blocks_[handle] = std::move(rec);
  return handle;
}

void LocalProvider::refresh(BlockRec& b) {
  if (b.state != BlockState::Active && b.state != BlockState::Terminating) return;
  bool any_alive = false;
  for (pid_t pid : b.pids)
    if (process_alive(pid)) any_alive = true;
  if (!any_alive) transition(b, BlockState::Done);
}

BlockState LocalProvider::status(const std::string& handle) {
  std::lock_guard lk(mu_);
  auto it = blocks_.find(handle);
  if (it == blocks_.end()) return BlockState::Failed;
  refresh(it->second);
  return it->second.state;
}

void LocalProvider::cancel(const std::string& handle) {
  std::unique_lock lk(mu_);
  auto it = blocks_.find(handle);
  if (it == blocks_.end()) return;
  BlockRec& b = it->second;
  if (b.state == BlockState::Done || b.state == BlockState::Failed) return;
  b.cancelled = true;
  if (b.state == BlockState::Active) transition(b, BlockState::Terminating);
  std::vector<pid_t> pids = b.pids;
  lk.unlock();
  for (pid_t pid : pids) terminate_process(pid);
  lk.lock();
  it = blocks_.find(handle);
  if (it != blocks_.end() && it->second.state != BlockState::Done)
    transition(it->second, BlockState::Done);
}

std::vector<pid_t> LocalProvider::block_pids(const std::string& handle) {
  std::lock_guard lk(mu_);
  auto it = blocks_.find(handle);
  if (it == blocks_.end()) return {};
  std::vector<pid_t> alive;
  for (pid_t pid : it->second.pids)
    if (process_alive(pid)) alive.push_back(pid);
  return alive;
}

std::vector<std::string> LocalProvider::handles() const {
  std::lock_guard lk(mu_);
  std::vector<std::string> out;
  for (const auto& [h, _] : blocks_) out.push_back(h);
  return out;
}

std::vector<BlockState> LocalProvider::state_history(const std::string& handle) const {
  std::lock_guard lk(mu_);
  auto it = blocks_.find(handle);
  return it == blocks_.end() ? std::vector<BlockState>{} : it->second.history;
}

// ---------------------------------------------------------------------------
// SimLrmProvider

SimLrmProvider::SimLrmProvider(SimLrmConfig cfg, LauncherSpec launcher)
    : cfg_(cfg), launcher_(launcher), rng_(cfg.seed) {
  ticker_ = std::thread([this] {
    while (true) {
      {
        std::lock_guard lk(mu_);
        if (stop_) return;
      }
      tick();
      sleep_ms(10);
    }
  });
}

SimLrmProvider::~SimLrmProvider() {
  {
    std::lock_guard lk(mu_);
    stop_ = true;
  }
  if (ticker_.joinable()) ticker_.join();
  for (auto& [_, b] : blocks_)
    for (pid_t pid : b.pids) terminate_process(pid);
}

void SimLrmProvider::transition(BlockRec& b, BlockState to) {
  if (b.state == to) return;
  b.state = to;
  b.history.push_back(to);
}

std::size_t SimLrmProvider::active_count_locked() const {
  std::size_t n = 0;
  for (const auto& [_, b] : blocks_)
    if (b.state == BlockState::Active) ++n;
  return n;
}

std::string SimLrmProvider::submit(const std::vector<std::string>& argv,
                                   int nodes_per_block,
                                   const std::map<std::string, std::string>& env) {
  std::lock_guard lk(mu_);
  std::string handle = "sim-" + cfg_.partition + "-" + std::to_string(next_id_++);
  BlockRec rec;
  rec.argv = argv;
  rec.env = env;
  rec.nodes = nodes_per_block;
  int delay = cfg_.queue_delay_min_ms;
  if (cfg_.queue_delay_max_ms > cfg_.queue_delay_min_ms) {
    std::uniform_int_distribution<int> d(cfg_.queue_delay_min_ms, cfg_.queue_delay_max_ms);
    delay = d(rng_);
  }
  rec.eligible_at_us = monotonic_us() + std::int64_t(delay) * 1000;
  if (cfg_.failure_rate > 0) {
    std::uniform_real_distribution<double> d(0.0, 1.0);
    rec.doomed = d(rng_) < cfg_.failure_rate;
  }
  transition(rec, BlockState::Queued);
  blocks_[handle] = std::move(rec);
  return handle;
}

void SimLrmProvider::tick() {
  std::unique_lock lk(mu_);
  std::int64_t now = monotonic_us();
  std::vector<pid_t> to_kill;
  for (auto& [handle, b] : blocks_) {
    switch (b.state) {
      case BlockState::Queued: {
        if (b.cancelled) {
          transition(b, BlockState::Terminating);
          transition(b, BlockState::Done);
          break;
        }
        if (now < b.eligible_at_us) break;
        if (b.doomed) {
          transition(b, BlockState::Failed);
          break;
        }
        if (active_count_locked() >= std::size_t(cfg_.max_active_blocks)) break;
        for (auto& cmd : render_launch(b.argv, launcher_, b.nodes)) {
          SpawnOptions opts;
          opts.env = cmd.env;
          for (const auto& [k, v] : b.env) opts.env[k] = v;
          opts.env["PAREX_BLOCK_ID"] = handle;
          opts.env["PAREX_PARTITION"] = cfg_.partition;
          opts.kill_on_parent_death = true;
          try {
            b.pids.push_back(spawn_process(cmd.argv, opts));
          } catch (const SpawnError&) {
            transition(b, BlockState::Failed);
            break;
          }
        }
        if (b.state == BlockState::Queued) {
          transition(b, BlockState::Active);
          if (cfg_.walltime_ms > 0)
            b.lease_end_us = now + std::int64_t(cfg_.walltime_ms) * 1000;
        }
        break;
      }
      case BlockState::Active: {
        bool any_alive = false;
        for (pid_t pid : b.pids)
          if (process_alive(pid)) any_alive = true;
        if (!any_alive) {
          transition(b, BlockState::Done);
          break;
        }
        if (b.lease_end_us > 0 && now >= b.lease_end_us) {
          // Lease expired: the scheduler reclaims the nodes.
          transition(b, BlockState::Terminating);
          to_kill.insert(to_kill.end(), b.pids.begin(), b.pids.end());
        }
        break;
      }
      case BlockState::Terminating: {
        bool any_alive = false;
        for (pid_t pid : b.pids)
          if (process_alive(pid)) any_alive = true;
        if (!any_alive) transition(b, BlockState::Done);
        break;
      }
      default:
        break;
    }
  }
  lk.unlock();
  for (pid_t pid : to_kill) terminate_process(pid, 0);
}

BlockState SimLrmProvider::status(const std::string& handle) {
  std::lock_guard lk(mu_);
  auto it = blocks_.find(handle);
  return it == blocks_.end() ? BlockState::Failed : it->second.state;
}

void SimLrmProvider::cancel(const std::string& handle) {
  std::unique_lock lk(mu_);
  auto it = blocks_.find(handle);
  if (it == blocks_.end()) return;
  BlockRec& b = it->second;
  if (b.state == BlockState::Done || b.state == BlockState::Failed) return;
  b.cancelled = true;
  std::vector<pid_t> pids;
  if (b.state == BlockState::Active) {
    transition(b, BlockState::Terminating);
    pids = b.pids;
  } else if (b.state == BlockState::Queued || b.state == BlockState::Requested) {
    transition(b, BlockState::Terminating);
    transition(b, BlockState::Done);
  }
  lk.unlock();
  for (pid_t pid : pids) terminate_process(pid);
}

std::vector<pid_t> SimLrmProvider::block_pids(const std::string& handle) {
  std::lock_guard lk(mu_);
  auto it = blocks_.find(handle);
  if (it == blocks_.end()) return {};
  std::vector<pid_t> alive;
  for (pid_t pid : it->second.pids)
    if (process_alive(pid)) alive.push_back(pid);
  return alive;
}

std::vector<std::string> SimLrmProvider::handles() const {
  std::lock_guard lk(mu_);
  std::vector<std::string> out;
  for (const auto& [h, _] : blocks_) out.push_back(h);
  return out;
}

std::vector<BlockState> SimLrmProvider::state_history(const std::string& handle) const {
  std::lock_guard lk(mu_);
  auto it = blocks_.find(handle);
  return it == blocks_.end() ? std::vector<BlockState>{} : it->second.history;
}

}  // namespace parex
