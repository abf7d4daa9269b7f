// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <mutex>
#include <optional>
#include <vector>

#include "parex/kernel.hpp"

namespace parex {

/// Transparent file staging. Inspects task arguments for file references; a
/// reference already present on the resource passes through, anything else
/// gets a synthetic transfer task inserted ahead of the consumer, which then
/// sees the staged reference (uri translated to a local path) in its place.
/// One transfer per (uri, executor) per run: later consumers share the edge.
class DataManager {
 public:
  explicit DataManager(Engine& engine) : engine_(engine) {}

  /// Engine::submit with staging resolution applied first. Tasks that need
  /// staging are pinned to one executor so the file lands where they run.
  FutureHandle submit(AppSpec app, ValueList args, ValueMap kwargs = ValueMap(),
                      Engine::SubmitOptions opts = Engine::SubmitOptions());

  struct ResolveOutcome {
    ValueList args;
    ValueMap kwargs;
    std::string executor;               // executor the refs were staged for
    std::size_t stage_tasks_inserted = 0;
    std::vector<FutureHandle> stage_futures;  // one per distinct pending uri
  };

  /// The resolution step alone. Idempotent: running it again over the
  /// rewritten arguments inserts nothing new.
  ResolveOutcome resolve_files(const ValueList& args, const ValueMap& kwargs,
                               std::optional<std::string> executor_hint);

  std::size_t total_stage_tasks() const {
    std::lock_guard lk(mu_);
    return total_inserted_;
  }

 private:
  Value rewrite(const Value& v, const std::string& executor, ResolveOutcome& out);
  FutureHandle stage_task_for(const FileRef& ref, const std::string& executor,
                              ResolveOutcome& out);

  Engine& engine_;
  mutable std::mutex mu_;
  // (uri, executor label) -> future of the staged FileRef
  std::map<std::pair<std::string, std::string>, FutureHandle> cache_;
  std::size_t total_inserted_ = 0;
};

}  // namespace parex
