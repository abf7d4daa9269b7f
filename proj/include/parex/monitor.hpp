// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "parex/task.hpp"

namespace parex {

struct MonitorEvent {
  enum class Kind { StateChange, Dispatch, ManagerEvent, BlockEvent, StageEvent };

  std::int64_t timestamp_us = 0;  // microseconds since run start
  std::uint64_t task_id = 0;      // 0 for non-task events
  Kind kind = Kind::StateChange;
  std::map<std::string, std::string> detail;

  static const char* kind_name(Kind k);
  static std::optional<Kind> kind_from_name(const std::string& s);
};

/// Destination for monitor events. append() must be lossless up to the last
/// flush().
class SinkIface {
 public:
  virtual ~SinkIface() = default;
  virtual void append(const MonitorEvent& e) = 0;
  virtual void flush() = 0;
};

/// Line-delimited file sink. First line is a header carrying the format
/// version, run id, PRNG seed, and the wall-clock epoch of run start; event
/// lines are tab-separated (timestamp_us, task_id, kind, comma-joined k=v
/// detail). Appends are serialized, so concurrent emitters never tear lines.
class FileSink : public SinkIface {
 public:
  FileSink(const std::string& path, const std::string& run_id, std::uint64_t seed,
           std::int64_t epoch_wall_us);
  ~FileSink() override;

  void append(const MonitorEvent& e) override;
  void flush() override;

 private:
  std::mutex mu_;
  std::FILE* f_ = nullptr;
};

struct MonitorHeader {
  int version = 0;
  std::string run_id;
  std::uint64_t seed = 0;
  std::int64_t epoch_wall_us = 0;
};

struct MonitorLog {
  MonitorHeader header;
  std::vector<MonitorEvent> events;
};

struct IncompleteLog : std::runtime_error {
  using std::runtime_error::runtime_error;
};

MonitorLog read_monitor_log(const std::string& path);

/// Rebuilds each task's state history and checks it against the legal
/// transition relation. Throws IncompleteLog if a task never reaches a
/// terminal state. Returns task_id -> ordered states.
std::map<std::uint64_t, std::vector<TaskState>> replay_task_histories(const MonitorLog& log);

struct Interval {
  std::int64_t start_us = 0;
  std::int64_t end_us = 0;
  std::int64_t length() const { return end_us > start_us ? end_us - start_us : 0; }
};

struct UtilizationReport {
  double utilization = 0.0;           // busy time / worker lifetime, in [0,1]
  std::int64_t makespan_us = 0;       // last completion - first launch
  std::int64_t busy_us = 0;           // total task wall clock
  std::int64_t worker_lifetime_us = 0;
  std::vector<Interval> busy_intervals;
};

/// Utilization = total task busy time / total worker lifetime, both clipped
/// to the run window [first launch, last completion]. Worker lifetimes come
/// from ManagerEvent records (a manager contributes `workers` workers from
/// registration until it is gone); busy intervals come from per-task
/// exec_start/exec_end detail.
UtilizationReport compute_utilization(const MonitorLog& log);

}  // namespace parex
