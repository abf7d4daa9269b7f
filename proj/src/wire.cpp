// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/wire.hpp"

namespace parex {

std::int64_t map_int(const ValueMap& m, const std::string& key, std::int64_t dflt) {
  auto it = m.find(key);
  return it != m.end() && it->second.is<std::int64_t>() ? it->second.as_int() : dflt;
}

std::string map_str(const ValueMap& m, const std::string& key, const std::string& dflt) {
  auto it = m.find(key);
  return it != m.end() && it->second.is<std::string>() ? it->second.as_string() : dflt;
}

bool map_bool(const ValueMap& m, const std::string& key, bool dflt) {
  auto it = m.find(key);
  return it != m.end() && it->second.is<bool>() ? it->second.as_bool() : dflt;
}

ValueMap envelope_to_map(const TaskEnvelope& env) {
  ValueMap m;
  m["id"] = Value(std::int64_t(env.task_id));
  m["attempt"] = Value(std::int64_t(env.attempt));
  m["kind"] = Value(std::int64_t(env.app.kind == AppSpec::Kind::ShellCommand ? 1 : 0));
  m["name"] = Value(env.app.name);
  m["fp"] = Value(env.app.body_fingerprint);
  if (!env.app.command_template.empty()) m["tmpl"] = Value(env.app.command_template);
  if (!env.app.stdout_path.empty()) m["stdout"] = Value(env.app.stdout_path);
  if (!env.app.stderr_path.empty()) m["stderr"] = Value(env.app.stderr_path);
  m["args"] = Value(env.args);
  m["kwargs"] = Value(env.kwargs);
  return m;
}

TaskEnvelope envelope_from_map(const ValueMap& m) {
  TaskEnvelope env;
  env.task_id = std::uint64_t(map_int(m, "id"));
  env.attempt = int(map_int(m, "attempt"));
  env.app.kind = map_int(m, "kind") == 1 ? AppSpec::Kind::ShellCommand
                                         : AppSpec::Kind::NativeFunction;
  env.app.name = map_str(m, "name");
  env.app.body_fingerprint = map_str(m, "fp");
  env.app.command_template = map_str(m, "tmpl");
  env.app.stdout_path = map_str(m, "stdout");
  env.app.stderr_path = map_str(m, "stderr");
  if (auto it = m.find("args"); it != m.end() && it->second.is<ValueList>())
    env.args = it->second.as_list();
  if (auto it = m.find("kwargs"); it != m.end() && it->second.is<ValueMap>())
    env.kwargs = it->second.as_map();
  return env;
}

ValueMap outcome_to_map(const Outcome& o) {
  ValueMap m;
  m["ok"] = Value(o.ok);
  if (o.ok) {
    m["value"] = o.value;
  } else {
    ValueMap err;
    err["kind"] = Value(std::string(error_kind_name(o.error.kind)));
    err["message"] = Value(o.error.message);
    ValueMap detail;
    for (const auto& [k, v] : o.error.detail) detail[k] = Value(v);
    err["detail"] = Value(std::move(detail));
    m["error"] = Value(std::move(err));
  }
  return m;
}

Outcome outcome_from_map(const ValueMap& m) {
  if (map_bool(m, "ok")) {
    auto it = m.find("value");
    return Outcome::success(it != m.end() ? it->second : Value());
  }
  ErrorInfo err;
  if (auto it = m.find("error"); it != m.end() && it->second.is<ValueMap>()) {
    const ValueMap& e = it->second.as_map();
    err.kind = error_kind_from_name(map_str(e, "kind", "Internal"));
    err.message = map_str(e, "message");
    if (auto d = e.find("detail"); d != e.end() && d->second.is<ValueMap>())
      for (const auto& [k, v] : d->second.as_map())
        if (v.is<std::string>()) err.detail[k] = v.as_string();
  } else {
    err.kind = ErrorKind::Internal;
    err.message = "malformed result frame";
  }
  return Outcome::failure(std::move(err));
}

ValueMap completion_to_map(const CompletionInfo& info) {
  ValueMap m = outcome_to_map(info.outcome);
  m["id"] = Value(std::int64_t(info.task_id));
  m["attempt"] = Value(std::int64_t(info.attempt));
  m["exec_start_us"] = Value(info.exec_start_us);
  m["exec_end_us"] = Value(info.exec_end_us);
  if (!info.manager_id.empty()) m["manager"] = Value(info.manager_id);
  if (info.worker_index >= 0) m["worker"] = Value(std::int64_t(info.worker_index));
  return m;
}

CompletionInfo completion_from_map(const ValueMap& m) {
  CompletionInfo info;
  info.task_id = std::uint64_t(map_int(m, "id"));
  info.attempt = int(map_int(m, "attempt"));
  info.outcome = outcome_from_map(m);
  info.exec_start_us = map_int(m, "exec_start_us");
  info.exec_end_us = map_int(m, "exec_end_us");
  info.manager_id = map_str(m, "manager");
  info.worker_index = int(map_int(m, "worker", -1));
  return info;
}

}  // namespace parex
