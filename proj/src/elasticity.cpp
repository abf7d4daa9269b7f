// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/elasticity.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "parex/clock.hpp"

namespace parex {

void StrategyConfig::validate() const {
  if (!(parallelism > 0.0) || parallelism > 1.0)
    throw std::invalid_argument("parallelism must be in (0, 1]");
  if (min_blocks > init_blocks || init_blocks > max_blocks)
    throw std::invalid_argument("need min_blocks <= init_blocks <= max_blocks");
  if (slots_per_block < 1) throw std::invalid_argument("slots_per_block must be >= 1");
  if (poll_period_ms < 1) throw std::invalid_argument("poll_period must be positive");
}

ScalingDecision strategy_tick(const LoadSnapshot& snap, const StrategyConfig& cfg) {
  ScalingDecision d;
  long required = long(
      std::ceil(double(snap.outstanding_tasks) * cfg.parallelism / double(cfg.slots_per_block)));
  required = std::clamp(required, long(cfg.min_blocks), long(cfg.max_blocks));

  long have = long(snap.active_blocks + snap.pending_blocks);
  if (have < required) {
    d.kind = ScalingDecision::Kind::ScaleOut;
    d.out_blocks = int(required - have);
    return d;
  }

  // Shrink: blocks idle past the timeout, oldest first, keeping at least
  // max(required, min_blocks) alive. Pending blocks are left to arrive.
  long keep = std::max(required, long(cfg.min_blocks));
  long removable = long(snap.active_blocks) - keep;
  if (removable <= 0) return d;

  std::vector<std::pair<std::string, std::int64_t>> idle = snap.idle_block_ages;
  std::sort(idle.begin(), idle.end(),
            [](const auto& a, const auto& b) { return a.second > b.second; });
  for (const auto& [block, age_us] : idle) {
    if (long(d.in_blocks.size()) >= removable) break;
    if (age_us >= std::int64_t(cfg.idle_timeout_ms) * 1000) d.in_blocks.push_back(block);
  }
  if (!d.in_blocks.empty()) d.kind = ScalingDecision::Kind::ScaleIn;
  return d;
}

StrategyLoop::StrategyLoop(Executor& executor, StrategyConfig cfg, std::string event_log_path)
    : executor_(executor), cfg_(cfg), log_path_(std::move(event_log_path)) {
  cfg_.validate();
}

StrategyLoop::~StrategyLoop() { stop(); }

void StrategyLoop::start() {
  if (thread_.joinable()) return;
  if (!executor_.supports_scaling())
    throw std::invalid_argument("executor '" + executor_.label() + "' does not scale");
  if (!log_path_.empty()) {
    log_ = std::fopen(log_path_.c_str(), "w");
    if (!log_) throw std::runtime_error("cannot open scaling log: " + log_path_);
  }
  stop_ = false;
  thread_ = std::thread([this] { run(); });
}

void StrategyLoop::stop() {
  stop_ = true;
  if (thread_.joinable()) thread_.join();
  if (log_) {
    std::fclose(log_);
    log_ = nullptr;
  }
}

void StrategyLoop::record(const ScalingDecision& d, const LoadSnapshot& snap) {
  ScalingEvent ev;
  ev.timestamp_us = monotonic_us();
  ev.outstanding = snap.outstanding_tasks;
  ev.active_blocks = snap.active_blocks;
  ev.pending_blocks = snap.pending_blocks;
  switch (d.kind) {
    case ScalingDecision::Kind::None:
      ev.decision = "none";
      break;
    case ScalingDecision::Kind::ScaleOut:
      ev.decision = "scale_out " + std::to_string(d.out_blocks);
      break;
    case ScalingDecision::Kind::ScaleIn: {
      std::ostringstream os;
      os << "scale_in ";
      for (std::size_t i = 0; i < d.in_blocks.size(); ++i)
        os << (i ? "," : "") << d.in_blocks[i];
      ev.decision = os.str();
      break;
    }
  }
  if (log_) {
    std::fprintf(log_, "%lld\t%s\t%zu\t%zu\t%zu\n",
                 static_cast<long long>(ev.timestamp_us), ev.decision.c_str(),
                 ev.outstanding, ev.active_blocks, ev.pending_blocks);
    std::fflush(log_);
  }
  std::lock_guard lk(mu_);
  events_.push_back(std::move(ev));
}

void StrategyLoop::run() {
  while (!stop_.load()) {
    LoadSnapshot snap = executor_.load_snapshot();
    ScalingDecision d = strategy_tick(snap, cfg_);
    // Provider failures surface as Failed blocks and drop out of the active
    // count, so the formula re-provisions on the next tick by itself.
    if (d.kind == ScalingDecision::Kind::ScaleOut) {
      executor_.scale_out(d.out_blocks);
    } else if (d.kind == ScalingDecision::Kind::ScaleIn) {
      executor_.scale_in(d.in_blocks);
    }
    record(d, snap);
    std::int64_t deadline = monotonic_us() + std::int64_t(cfg_.poll_period_ms) * 1000;
    while (!stop_.load() && monotonic_us() < deadline)
      sleep_ms(std::min(10, cfg_.poll_period_ms));
  }
}

std::vector<ScalingEvent> StrategyLoop::events() const {
  std::lock_guard lk(mu_);
  return events_;
}

}  // namespace parex
