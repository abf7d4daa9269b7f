// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/app.hpp"

#include "parex/digest.hpp"

namespace parex {

AppRegistry& AppRegistry::global() {
  static AppRegistry reg;
  return reg;
}

void AppRegistry::register_fn(const std::string& name, const std::string& source,
                              NativeFn fn) {
  entries_[name] = Entry{std::move(fn), sha256_hex("native:" + name + ":" + source)};
}

bool AppRegistry::contains(const std::string& name) const {
  return entries_.count(name) > 0;
}

const NativeFn* AppRegistry::find(const std::string& name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? nullptr : &it->second.fn;
}

std::string AppRegistry::fingerprint(const std::string& name) const {
  auto it = entries_.find(name);
  return it == entries_.end() ? std::string() : it->second.fingerprint;
}

AppSpec AppRegistry::native(const std::string& name) const {
  AppSpec s;
  s.kind = AppSpec::Kind::NativeFunction;
  s.name = name;
  s.body_fingerprint = fingerprint(name);
  return s;
}

std::vector<std::string> AppRegistry::names() const {
  std::vector<std::string> out;
  out.reserve(entries_.size());
  for (const auto& [k, _] : entries_) out.push_back(k);
  return out;
}

AppSpec shell_app(const std::string& label, const std::string& command_template,
                  const std::string& stdout_path, const std::string& stderr_path) {
  AppSpec s;
  s.kind = AppSpec::Kind::ShellCommand;
  s.name = label;
  s.command_template = command_template;
  s.body_fingerprint = sha256_hex("shell:" + command_template);
  s.stdout_path = stdout_path;
  s.stderr_path = stderr_path;
  return s;
}

}  // namespace parex
