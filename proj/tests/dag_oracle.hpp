// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <optional>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "parex/app.hpp"
#include "parex/value.hpp"

namespace parex::test {

// A DAG spec for correctness tests: task i may reference tasks j < i through
// FutureRef{j+1} placeholders (positions are 1-based to mirror engine ids
// assigned in submission order on a fresh engine).
struct SpecTask {
  std::string app;  // add | echo | concat | fail_always
  ValueList args;
};

struct OracleResult {
  bool ok = false;
  Value value;
  bool poisoned = false;  // failed by its own app
};

/// Independent reference evaluation: strictly serial, in submission order,
/// replicating the builtin app semantics and the fail-dependents rule. This
/// is the ground truth the engine is checked against; it shares no code with
/// the engine's dispatch path.
inline std::vector<OracleResult> serial_reference_eval(const std::vector<SpecTask>& tasks) {
  std::vector<OracleResult> results(tasks.size());
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    const SpecTask& t = tasks[i];
    bool dep_failed = false;
    ValueList resolved;
    for (const Value& a : t.args) {
      if (a.is<FutureRef>()) {
        std::size_t j = std::size_t(a.as<FutureRef>().task_id) - 1;
        if (!results[j].ok) {
          dep_failed = true;
          break;
        }
        resolved.push_back(results[j].value);
      } else {
        resolved.push_back(a);
      }
    }
    OracleResult& r = results[i];
    if (dep_failed) {
      r.ok = false;
      continue;
    }
    if (t.app == "fail_always") {
      r.ok = false;
      r.poisoned = true;
    } else if (t.app == "add") {
      r.ok = true;
      r.value = Value(resolved.at(0).as_int() + resolved.at(1).as_int());
    } else if (t.app == "echo") {
      r.ok = true;
      r.value = resolved.at(0);
    } else if (t.app == "concat") {
      std::string out;
      for (const auto& v : resolved)
        out += v.is<std::string>() ? v.as_string() : v.repr();
      r.ok = true;
      r.value = Value(std::move(out));
    } else {
      throw std::logic_error("oracle does not model app " + t.app);
    }
  }
  return results;
}

/// Downstream closure of the poisoned tasks (graph-reachability oracle for
/// failure propagation).
inline std::set<std::size_t> failed_closure(const std::vector<SpecTask>& tasks) {
  std::set<std::size_t> failed;
  for (std::size_t i = 0; i < tasks.size(); ++i) {
    bool fails = tasks[i].app == "fail_always";
    if (!fails) {
      for (const Value& a : tasks[i].args)
        if (a.is<FutureRef>() && failed.count(std::size_t(a.as<FutureRef>().task_id) - 1))
          fails = true;
    }
    if (fails) failed.insert(i);
  }
  return failed;
}

/// Random DAG: `n` tasks, some poisoned, edges only to earlier tasks.
/// Int-valued apps reference only int-valued producers so the arithmetic
/// stays well-typed; concat consumes anything.
inline std::vector<SpecTask> random_dag(std::mt19937_64& rng, int n, int poisoned) {
  std::vector<SpecTask> tasks;
  std::vector<std::size_t> int_producers;
  std::vector<std::size_t> poisons;
  std::set<std::size_t> poison_at;
  while (int(poison_at.size()) < poisoned && n > 1)
    poison_at.insert(rng() % std::size_t(n));

  for (int i = 0; i < n; ++i) {
    SpecTask t;
    if (poison_at.count(std::size_t(i))) {
      t.app = "fail_always";
      t.args.push_back(Value("poisoned"));
      tasks.push_back(std::move(t));
      poisons.push_back(std::size_t(i));
      continue;
    }
    int kind = int(rng() % 10);
    // A poisoned dependency never resolves, so it is type-safe anywhere.
    auto ref_int = [&]() -> std::optional<Value> {
      if (!poisons.empty() && rng() % 5 == 0)
        return Value(FutureRef{poisons[rng() % poisons.size()] + 1});
      if (int_producers.empty()) return std::nullopt;
      return Value(FutureRef{int_producers[rng() % int_producers.size()] + 1});
    };
    auto ref_any = [&]() -> std::optional<Value> {
      if (i == 0) return std::nullopt;
      return Value(FutureRef{rng() % std::size_t(i) + 1});
    };
    auto int_or_const = [&]() {
      if (auto r = ref_int(); r && (rng() & 1)) return *r;
      return Value(std::int64_t(rng() % 1000));
    };
    if (kind < 5) {
      t.app = "add";
      t.args = {int_or_const(), int_or_const()};
      int_producers.push_back(std::size_t(i));
    } else if (kind < 8) {
      t.app = "echo";
      t.args = {int_or_const()};
      int_producers.push_back(std::size_t(i));
    } else {
      t.app = "concat";
      int argc = 1 + int(rng() % 3);
      for (int a = 0; a < argc; ++a) {
        if (auto r = ref_any(); r && (rng() & 1))
          t.args.push_back(*r);
        else
          t.args.push_back(Value("s" + std::to_string(rng() % 10)));
      }
    }
    tasks.push_back(std::move(t));
  }
  return tasks;
}

}  // namespace parex::test
