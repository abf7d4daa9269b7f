// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/local_executor.hpp"

#include "parex/clock.hpp"
#include "parex/monitor.hpp"

namespace parex {

namespace {

void emit_manager_event(SinkIface* sink, std::int64_t t0_us, const std::string& event,
                        const std::string& label, int workers) {
  if (!sink) return;
  MonitorEvent e;
  e.timestamp_us = monotonic_us() - t0_us;
  e.kind = MonitorEvent::Kind::ManagerEvent;
  e.detail = {{"event", event},
              {"manager_id", "local:" + label},
              {"block", "local:" + label},
              {"executor", label},
              {"workers", std::to_string(workers)}};
  sink->append(e);
}

}  // namespace

LocalExecutor::LocalExecutor(std::string label, int workers, std::string sandbox_root)
    : Executor(std::move(label)),
      workers_n_(workers < 1 ? 1 : workers),
      kernel_(AppRegistry::global(), std::move(sandbox_root)) {}

LocalExecutor::~LocalExecutor() { shutdown(); }

void LocalExecutor::start() {
  std::lock_guard lk(mu_);
  if (!threads_.empty()) return;
  for (int i = 0; i < workers_n_; ++i)
    threads_.emplace_back([this, i] { worker_loop(i); });
  status_ = ExecutorStatus::Running;
  emit_manager_event(monitor_, monitor_t0_us_, "register", label_, workers_n_);
}

void LocalExecutor::attach_monitor(SinkIface* sink, std::int64_t t0_us) {
  monitor_ = sink;
  monitor_t0_us_ = t0_us;
}

void LocalExecutor::submit_task(TaskEnvelope env) {
  {
    std::lock_guard lk(mu_);
    if (stop_ || status_ == ExecutorStatus::Stopped)
      throw ExecutorShutdown("executor '" + label_ + "' is shut down");
    queue_.push_back(std::move(env));
  }
  cv_.notify_one();
}

std::size_t LocalExecutor::pending_count() const {
  std::lock_guard lk(mu_);
  return queue_.size() + in_flight_;
}

ExecutorStatus LocalExecutor::status() const { return status_.load(); }

void LocalExecutor::shutdown() {
  {
    std::lock_guard lk(mu_);
    if (stop_) return;
    stop_ = true;
    status_ = ExecutorStatus::Draining;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
  threads_.clear();
  status_ = ExecutorStatus::Stopped;
  emit_manager_event(monitor_, monitor_t0_us_, "gone", label_, workers_n_);
}

LoadSnapshot LocalExecutor::load_snapshot() {
  LoadSnapshot s;
  s.outstanding_tasks = pending_count();
  s.active_slots = static_cast<std::size_t>(workers_n_);
  s.active_blocks = 1;
  return s;
}

void LocalExecutor::worker_loop(int index) {
  for (;;) {
    TaskEnvelope env;
    {
      std::unique_lock lk(mu_);
      cv_.wait(lk, [this] { return stop_ || !queue_.empty(); });
      if (queue_.empty()) return;  // stop requested and drained
      env = std::move(queue_.front());
      queue_.pop_front();
      ++in_flight_;
    }
    CompletionInfo info;
    info.task_id = env.task_id;
    info.attempt = env.attempt;
    info.manager_id = "local:" + label_;
    info.worker_index = index;
    info.exec_start_us = monotonic_us();
    TaskContext ctx{env.task_id, env.attempt, ""};
    info.outcome = kernel_.execute(env.app, env.args, env.kwargs, ctx);
    info.exec_end_us = monotonic_us();
    {
      std::lock_guard lk(mu_);
      --in_flight_;
    }
    deliver(std::move(info));
  }
}

}  // namespace parex
