// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/task.hpp"

namespace parex {

const char* task_state_name(TaskState s) {
  switch (s) {
    case TaskState::Pending: return "Pending";
    case TaskState::Launchable: return "Launchable";
    case TaskState::Launched: return "Launched";
    case TaskState::Running: return "Running";
    case TaskState::Succeeded: return "Succeeded";
    case TaskState::Failed: return "Failed";
    case TaskState::MemoHit: return "MemoHit";
    case TaskState::Retrying: return "Retrying";
  }
  return "?";
}

bool task_transition_legal(TaskState from, TaskState to) {
  using S = TaskState;
  switch (from) {
    case S::Pending:
      // Failed covers dependency errors and rejected hints caught before launch.
      return to == S::Launchable || to == S::MemoHit || to == S::Failed;
    case S::Launchable:
      return to == S::Launched || to == S::Failed || to == S::MemoHit;
    case S::Launched:
      return to == S::Running || to == S::Succeeded || to == S::Failed;
    case S::Running:
      return to == S::Succeeded || to == S::Failed;
    case S::Failed:
      return to == S::Retrying;
    case S::Retrying:
      return to == S::Launchable;
    case S::Succeeded:
    case S::MemoHit:
      return false;  // terminal
  }
  return false;
}

}  // namespace parex
