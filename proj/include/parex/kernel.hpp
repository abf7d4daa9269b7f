// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <atomic>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <thread>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "parex/checkpoint.hpp"
#include "parex/executor.hpp"
#include "parex/future.hpp"
#include "parex/memo.hpp"
#include "parex/monitor.hpp"
#include "parex/task.hpp"

namespace parex {

struct EngineShutdown : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct UnknownAppError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct EngineConfig {
  int max_retries = 0;  // per task, beyond the first launch
  bool checkpointing = false;
  std::string checkpoint_write_path;
  std::vector<std::string> checkpoint_load_paths;
  std::uint64_t seed = 1;
  // Optional per-task future timeout; disabled when unset.
  std::optional<std::int64_t> task_timeout_ms;
  std::string run_id = "run";
  std::shared_ptr<SinkIface> monitor;
};

struct RunSummary {
  std::size_t succeeded = 0;
  std::size_t failed = 0;
  std::size_t memo_hits = 0;
};

struct SubmitOptions {
  std::optional<std::string> executor_hint;
  bool memoize = true;
};

/// The execution-management engine. Builds the dynamic task graph from
/// asynchronously submitted tasks, fires dependency edges as futures resolve,
/// picks executors, retries failures, and consults/updates the memoization
/// and checkpoint stores.
///
/// One event loop thread owns all graph state. submit() may be called from
/// any number of client threads; executor completions are posted onto the
/// event queue from executor-internal threads. Waiting on a FutureHandle
/// never blocks event processing.
class Engine {
 public:
  explicit Engine(EngineConfig cfg = {});
  ~Engine();
  Engine(const Engine&) = delete;
  Engine& operator=(const Engine&) = delete;

  void add_executor(std::shared_ptr<Executor> ex);
  Executor* executor(const std::string& label) const;
  std::vector<std::string> executor_labels() const;

  void start();

  using SubmitOptions = parex::SubmitOptions;

  /// Registers the task and returns its future immediately. Dependencies are
  /// the FutureRefs found anywhere in args/kwargs. Throws UnknownAppError for
  /// an unregistered native app and EngineShutdown after shutdown().
  FutureHandle submit(AppSpec app, ValueList args, ValueMap kwargs = ValueMap(),
                      SubmitOptions opts = SubmitOptions());

  /// Future resolving to the staged output file once `producer` succeeds;
  /// fails with OutputMissing if the task completes without creating it.
  /// Declaring the same path twice is a configuration error.
  FutureHandle declare_output(const FutureHandle& producer, const FileRef& ref);

  /// Blocks until every submitted task is terminal.
  RunSummary wait_all();

  void shutdown();

  /// Microseconds since engine construction (the timestamp base for
  /// TaskRecord times and monitor events).
  std::int64_t now_us() const;

  /// Seeded choice among configured executors; used for tasks without hints
  /// and by the data manager to pin staging to its consumer's executor.
  std::string pick_executor_label();

  // Post-hoc introspection (safe after wait_all/shutdown; snapshots
  // otherwise).
  TaskRecord task_snapshot(std::uint64_t task_id) const;
  std::vector<std::pair<std::uint64_t, std::string>> dispatch_log() const;
  std::size_t executor_submissions() const;
  std::size_t memo_hits() const;
  const EngineConfig& config() const { return cfg_; }
  SinkIface* monitor() const { return cfg_.monitor.get(); }

  // Used by the data manager to emit staging events.
  void emit_stage_event(std::uint64_t task_id, std::map<std::string, std::string> detail);

 private:
  struct SubmitEv {
    TaskRecord record;
    FutureHandle future;
  };
  struct CompletionEv {
    CompletionInfo info;
  };
  struct OutputWatchEv {
    std::uint64_t producer;
    FileRef ref;
    FutureHandle future;
  };
  struct Event {
    enum class Kind { Submit, Completion, OutputWatch, Stop } kind;
    std::shared_ptr<SubmitEv> submit;
    CompletionEv completion;
    std::shared_ptr<OutputWatchEv> watch;
  };

  struct TaskEntry {
    TaskRecord record;
    FutureHandle future;
    Outcome outcome;
    std::size_t unresolved = 0;
    bool dep_failed = false;
    ErrorInfo dep_error;
    std::vector<std::uint64_t> dependents;
    std::vector<std::shared_ptr<OutputWatchEv>> output_watches;
    std::int64_t deadline_us = 0;  // task timeout, 0 = none
  };

  void loop();
  void post(Event ev);
  void handle_submit(SubmitEv& ev);
  void handle_completion(const CompletionInfo& info);
  void dispatch(TaskEntry& t);
  void complete_task(TaskEntry& t, Outcome outcome, TaskState terminal,
                     const CompletionInfo* info);
  void fail_dependents(TaskEntry& t);
  void fire_edges(TaskEntry& t);
  Value substitute(const Value& v) const;
  void set_state(TaskEntry& t, TaskState to,
                 std::map<std::string, std::string> extra = {});
  void emit(MonitorEvent::Kind kind, std::uint64_t task_id,
            std::map<std::string, std::string> detail);
  void check_timeouts();
  std::int64_t next_deadline_us() const;

  EngineConfig cfg_;
  std::int64_t t0_us_ = 0;

  std::vector<std::shared_ptr<Executor>> executors_;
  std::unordered_map<std::string, std::shared_ptr<Executor>> executors_by_label_;

  mutable std::mutex qmu_;
  std::condition_variable qcv_;
  std::deque<Event> queue_;
  bool started_ = false;
  bool stopping_ = false;

  std::thread loop_thread_;

  // Loop-owned (no locking inside the loop except the snapshot mutex below).
  std::unordered_map<std::uint64_t, TaskEntry> tasks_;
  std::unordered_map<std::string, std::uint64_t> declared_outputs_;
  MemoTable memo_;
  CheckpointWriter checkpoint_;
  std::mt19937_64 rng_;
  std::mutex rng_mu_;

  std::atomic<std::uint64_t> next_task_id_{1};

  // Run accounting, guarded by done_mu_ for wait_all().
  mutable std::mutex done_mu_;
  std::condition_variable done_cv_;
  std::size_t submitted_ = 0;
  std::size_t terminal_ = 0;
  RunSummary summary_;

  mutable std::mutex snap_mu_;
  std::vector<std::pair<std::uint64_t, std::string>> dispatch_log_;
  std::size_t executor_submissions_ = 0;
  std::unordered_map<std::uint64_t, TaskRecord> finished_;
};

}  // namespace parex
