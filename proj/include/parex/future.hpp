// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <memory>
#include <mutex>

#include "parex/value.hpp"

namespace parex {

/// Single-update result container returned at submission. The payload is
/// written exactly once; every waiter observes the same outcome. Copies share
/// state, so handles are cheap to pass around.
class FutureHandle {
 public:
  FutureHandle() = default;
  static FutureHandle make(std::uint64_t task_id);

  std::uint64_t task_id() const;

  /// Never blocks.
  bool done() const;

  /// Blocks until the task is terminal.
  const Outcome& result() const;

  /// Blocks up to `timeout`; nullptr if still unresolved.
  const Outcome* result_for(std::chrono::milliseconds timeout) const;

  /// Publish the outcome. Exactly one call may ever succeed; later calls are
  /// ignored (the first write wins).
  void complete(Outcome o) const;

  bool valid() const { return state_ != nullptr; }

  /// Value placeholder for passing this future as an argument to another app.
  Value ref() const { return Value(FutureRef{task_id()}); }

 private:
  struct State {
    std::uint64_t task_id = 0;
    mutable std::mutex mu;
    mutable std::condition_variable cv;
    bool done = false;
    Outcome outcome;
  };
  std::shared_ptr<State> state_;
};

}  // namespace parex
