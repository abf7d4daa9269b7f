// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/data_manager.hpp"

#include <filesystem>

#include "parex/staging.hpp"

namespace parex {

FutureHandle DataManager::stage_task_for(const FileRef& ref, const std::string& executor,
                                         ResolveOutcome& out) {
  auto key = std::make_pair(ref.uri, executor);
  // Held across the submit so two racing consumers cannot both insert a
  // transfer for the same (uri, executor).
  std::lock_guard lk(mu_);
  auto it = cache_.find(key);
  if (it != cache_.end()) return it->second;

  const char* app = ref.scheme == FileRef::Scheme::Http ? kStageHttpApp : kStageLocalApp;
  Engine::SubmitOptions opts;
  opts.executor_hint = executor;
  opts.memoize = false;  // a staged path is only valid for this run/resource
  FutureHandle fut =
      engine_.submit(AppRegistry::global().native(app), ValueList{Value(ref)}, {}, opts);
  engine_.emit_stage_event(fut.task_id(),
                           {{"uri", ref.uri}, {"executor", executor}, {"event", "insert"}});
  cache_.emplace(key, fut);
  ++total_inserted_;
  ++out.stage_tasks_inserted;
  out.stage_futures.push_back(fut);
  return fut;
}

Value DataManager::rewrite(const Value& v, const std::string& executor,
                           ResolveOutcome& out) {
  if (v.is<FileRef>()) {
    const FileRef& ref = v.as<FileRef>();
    if (ref.staged) return v;
    if (ref.scheme == FileRef::Scheme::Local && std::filesystem::exists(ref.uri)) {
      // Already available on the resource: mark in place, no transfer task.
      FileRef staged = ref;
      staged.local_path = ref.uri;
      staged.staged = true;
      return Value(std::move(staged));
    }
    return stage_task_for(ref, executor, out).ref();
  }
  if (v.is<ValueList>()) {
    ValueList l;
    l.reserve(v.as_list().size());
    for (const auto& e : v.as_list()) l.push_back(rewrite(e, executor, out));
    return Value(std::move(l));
  }
  if (v.is<ValueMap>()) {
    ValueMap m;
    for (const auto& [k, e] : v.as_map()) m.emplace(k, rewrite(e, executor, out));
    return Value(std::move(m));
  }
  return v;
}

DataManager::ResolveOutcome DataManager::resolve_files(
    const ValueList& args, const ValueMap& kwargs,
    std::optional<std::string> executor_hint) {
  ResolveOutcome out;
  out.executor = executor_hint ? *executor_hint : engine_.pick_executor_label();
  out.args.reserve(args.size());
  for (const auto& a : args) out.args.push_back(rewrite(a, out.executor, out));
  for (const auto& [k, v] : kwargs) out.kwargs.emplace(k, rewrite(v, out.executor, out));
  return out;
}

FutureHandle DataManager::submit(AppSpec app, ValueList args, ValueMap kwargs,
                                 Engine::SubmitOptions opts) {
  ResolveOutcome r = resolve_files(args, kwargs, opts.executor_hint);
  if (r.stage_tasks_inserted > 0 || !r.stage_futures.empty()) {
    // Pin the consumer to the executor its files were staged for.
    opts.executor_hint = r.executor;
  }
  return engine_.submit(std::move(app), std::move(r.args), std::move(r.kwargs), opts);
}

}  // namespace parex
