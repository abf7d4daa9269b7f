// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <sys/types.h>

#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace parex {

struct SpawnError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct SpawnOptions {
  std::map<std::string, std::string> env;  // added to the inherited environment
  std::string cwd;                         // empty = inherit
  std::string stdout_path;                 // empty = inherit
  std::string stderr_path;
  bool kill_on_parent_death = false;  // PR_SET_PDEATHSIG(SIGKILL)
  int stdout_pipe_fd = -1;            // if >= 0, dup this write end onto stdout
  int pass_fd = -1;                   // keep this fd open across exec
};

/// fork+exec. argv[0] is resolved via PATH.
pid_t spawn_process(const std::vector<std::string>& argv, const SpawnOptions& opts = {});

/// Non-blocking liveness probe.
bool process_alive(pid_t pid);

/// Blocks until exit; returns wait status (see waitpid).
int wait_process(pid_t pid);

/// Reaps without blocking; returns exit status if the process is gone.
std::optional<int> try_wait_process(pid_t pid);

/// SIGTERM, grace period, then SIGKILL. Safe to call repeatedly.
void terminate_process(pid_t pid, int grace_ms = 200);

/// Absolute path of the running executable.
std::string self_exe_path();

}  // namespace parex
