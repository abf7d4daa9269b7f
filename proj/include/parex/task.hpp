// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <set>
#include <string>

#include "parex/app.hpp"
#include "parex/value.hpp"

namespace parex {

enum class TaskState {
  Pending,
  Launchable,
  Launched,
  Running,
  Succeeded,
  Failed,
  MemoHit,
  Retrying,
};

const char* task_state_name(TaskState s);

/// Legal transitions:
///   Pending -> Launchable -> Launched -> Running -> {Succeeded | Failed}
///   Failed -> Retrying -> Launchable        (while retries remain)
///   Pending -> MemoHit
/// plus the short-circuit failures (dependency errors, bad hints) that skip
/// the launch states. MemoHit and Succeeded are terminal.
bool task_transition_legal(TaskState from, TaskState to);

inline bool task_state_terminal(TaskState s) {
  return s == TaskState::Succeeded || s == TaskState::Failed || s == TaskState::MemoHit;
}

/// One node of the dynamic task graph.
struct TaskRecord {
  std::uint64_t task_id = 0;
  AppSpec app;
  ValueList args;
  ValueMap kwargs;
  std::set<std::uint64_t> depends_on;
  TaskState state = TaskState::Pending;
  int retries_left = 0;
  std::optional<std::string> executor_hint;
  bool memoize = true;

  // Microseconds since engine start; 0 = not reached.
  std::int64_t submit_time = 0;
  std::int64_t launch_time = 0;
  std::int64_t complete_time = 0;

  int attempts = 0;  // executor submissions so far
  std::string memo_digest;
};

}  // namespace parex
