// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "parex/value.hpp"

namespace parex {

/// What to run. Native apps are named entries in the worker-side registry;
/// the engine ships (name, args), never code. Shell apps carry a command
/// template rendered with the task arguments.
struct AppSpec {
  enum class Kind { NativeFunction, ShellCommand };

  Kind kind = Kind::NativeFunction;
  std::string name;              // registry key, or a label for shell apps
  std::string body_fingerprint;  // stable content hash of the implementation
  std::string command_template;  // shell apps only
  std::string stdout_path;       // shell apps only; empty = discard
  std::string stderr_path;

  bool is_shell() const { return kind == Kind::ShellCommand; }
};

struct TaskContext {
  std::uint64_t task_id = 0;
  int attempt = 0;
  std::string sandbox_dir;
  std::string staging_dir;  // shared per-executor staging area
};

using NativeFn = std::function<Outcome(const ValueList& args, const ValueMap& kwargs,
                                       const TaskContext& ctx)>;

/// Worker-side function registry. Both the submitting program and the worker
/// agents link the same registrations, so a NativeFunction name resolves
/// wherever the task lands.
class AppRegistry {
 public:
  static AppRegistry& global();

  /// `source` is any stable description of the implementation (its text or a
  /// version string); the fingerprint is derived from it, so changing the
  /// implementation changes every memo key that uses it.
  void register_fn(const std::string& name, const std::string& source, NativeFn fn);

  bool contains(const std::string& name) const;
  const NativeFn* find(const std::string& name) const;
  std::string fingerprint(const std::string& name) const;  // empty if absent

  /// AppSpec for a registered native function.
  AppSpec native(const std::string& name) const;

  std::vector<std::string> names() const;

 private:
  struct Entry {
    NativeFn fn;
    std::string fingerprint;
  };
  std::map<std::string, Entry> entries_;
};

/// AppSpec for a shell-command template. Placeholders: {0},{1},... bind
/// positional args, {key} binds kwargs, doubled braces escape literals.
AppSpec shell_app(const std::string& label, const std::string& command_template,
                  const std::string& stdout_path = "", const std::string& stderr_path = "");

}  // namespace parex
