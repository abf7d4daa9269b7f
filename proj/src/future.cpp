// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/future.hpp"

namespace parex {

FutureHandle FutureHandle::make(std::uint64_t task_id) {
  FutureHandle h;
  h.state_ = std::make_shared<State>();
  h.state_->task_id = task_id;
  return h;
}

std::uint64_t FutureHandle::task_id() const { return state_ ? state_->task_id : 0; }

bool FutureHandle::done() const {
  if (!state_) return false;
  std::lock_guard lk(state_->mu);
  return state_->done;
}

const Outcome& FutureHandle::result() const {
  std::unique_lock lk(state_->mu);
  state_->cv.wait(lk, [this] { return state_->done; });
  return state_->outcome;
}

const Outcome* FutureHandle::result_for(std::chrono::milliseconds timeout) const {
  std::unique_lock lk(state_->mu);
  if (!state_->cv.wait_for(lk, timeout, [this] { return state_->done; })) return nullptr;
  return &state_->outcome;
}

void FutureHandle::complete(Outcome o) const {
  {
    std::lock_guard lk(state_->mu);
    if (state_->done) return;  // single-update: first write wins
    state_->outcome = std::move(o);
    state_->done = true;
  }
  state_->cv.notify_all();
}

}  // namespace parex
