// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <string>

#include "parex/app.hpp"
#include "parex/value.hpp"

namespace parex {

/// Memoization key: hex digest over the app name, its body fingerprint, and
/// the canonical encodings of args and kwargs. Stable across processes and
/// runs, so checkpoint files written by one run resolve in the next.
/// Args/kwargs must not contain unresolved FutureRefs.
std::string memo_key(const AppSpec& app, const ValueList& args, const ValueMap& kwargs);

/// In-memory cache of successful results keyed by memo digest.
class MemoTable {
 public:
  std::optional<Value> lookup(const std::string& key) const {
    auto it = entries_.find(key);
    if (it == entries_.end()) return std::nullopt;
    return it->second;
  }
  void store(const std::string& key, Value v) { entries_[key] = std::move(v); }
  std::size_t size() const { return entries_.size(); }

 private:
  std::map<std::string, Value> entries_;
};

}  // namespace parex
