// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "parex/app.hpp"
#include "parex/executor.hpp"

namespace parex {

struct TemplateError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Render a shell command template: {0},{1},... bind positional args, {key}
/// binds kwargs, '{{' and '}}' are literal braces. Throws TemplateError on an
/// unbound placeholder.
std::string render_command(const std::string& tmpl, const ValueList& args,
                           const ValueMap& kwargs);

/// Shared worker-side execution kernel: resolves native functions in the
/// registry and runs shell commands in per-task sandbox directories. One
/// kernel instance serves every worker in a process.
class ExecutionKernel {
 public:
  ExecutionKernel(const AppRegistry& registry, std::string sandbox_root);

  /// Runs one fully-resolved task attempt. Never throws: every failure is an
  /// error outcome. Shell tasks get a fresh sandbox dir
  /// <root>/task_<id>_try_<attempt>; relative stdout/stderr paths land there.
  Outcome execute(const AppSpec& app, const ValueList& args, const ValueMap& kwargs,
                  const TaskContext& ctx) const;

  const std::string& sandbox_root() const { return sandbox_root_; }
  std::string sandbox_dir_for(std::uint64_t task_id, int attempt) const;

 private:
  Outcome run_native(const AppSpec& app, const ValueList& args, const ValueMap& kwargs,
                     const TaskContext& ctx) const;
  Outcome run_shell(const AppSpec& app, const ValueList& args, const ValueMap& kwargs,
                    TaskContext ctx) const;

  const AppRegistry& registry_;
  std::string sandbox_root_;
};

}  // namespace parex
