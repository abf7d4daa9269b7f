// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/kernel.hpp"

#include <sys/stat.h>

#include <algorithm>
#include <cassert>

#include "parex/clock.hpp"

namespace parex {

namespace {

void collect_deps(const Value& v, std::set<std::uint64_t>& deps) {
  if (v.is<FutureRef>()) {
    deps.insert(v.as<FutureRef>().task_id);
  } else if (v.is<ValueList>()) {
    for (const auto& e : v.as_list()) collect_deps(e, deps);
  } else if (v.is<ValueMap>()) {
    for (const auto& [_, e] : v.as_map()) collect_deps(e, deps);
  }
}

bool file_exists(const std::string& path) {
  struct stat st;
  return ::stat(path.c_str(), &st) == 0 && S_ISREG(st.st_mode);
}

}  // namespace

Engine::Engine(EngineConfig cfg) : cfg_(std::move(cfg)), rng_(cfg_.seed) {
  t0_us_ = monotonic_us();
  if (!cfg_.checkpoint_load_paths.empty())
    memo_ = load_checkpoints(cfg_.checkpoint_load_paths);
  if (cfg_.checkpointing && !cfg_.checkpoint_write_path.empty())
    checkpoint_.open(cfg_.checkpoint_write_path);
}

Engine::~Engine() { shutdown(); }

std::int64_t Engine::now_us() const { return monotonic_us() - t0_us_; }

void Engine::add_executor(std::shared_ptr<Executor> ex) {
  if (started_) throw std::logic_error("add_executor after start");
  if (executors_by_label_.count(ex->label()))
    throw std::logic_error("duplicate executor label: " + ex->label());
  executors_by_label_[ex->label()] = ex;
  executors_.push_back(std::move(ex));
}

Executor* Engine::executor(const std::string& label) const {
  auto it = executors_by_label_.find(label);
  return it == executors_by_label_.end() ? nullptr : it->second.get();
}

std::vector<std::string> Engine::executor_labels() const {
  std::vector<std::string> out;
  for (const auto& ex : executors_) out.push_back(ex->label());
  return out;
}

void Engine::start() {
  if (started_) return;
  if (executors_.empty()) throw std::logic_error("engine needs at least one executor");
  for (auto& ex : executors_) {
    ex->set_completion_handler([this](CompletionInfo info) {
      Event ev;
      ev.kind = Event::Kind::Completion;
      ev.completion.info = std::move(info);
      post(std::move(ev));
    });
    if (cfg_.monitor) ex->attach_monitor(cfg_.monitor.get(), t0_us_);
    ex->start();
  }
  started_ = true;
  loop_thread_ = std::thread([this] { loop(); });
}

void Engine::post(Event ev) {
  {
    std::lock_guard lk(qmu_);
    queue_.push_back(std::move(ev));
  }
  qcv_.notify_one();
}

std::string Engine::pick_executor_label() {
  std::lock_guard lk(rng_mu_);
  std::uniform_int_distribution<std::size_t> d(0, executors_.size() - 1);
  return executors_[d(rng_)]->label();
}

FutureHandle Engine::submit(AppSpec app, ValueList args, ValueMap kwargs,
                            SubmitOptions opts) {
  if (!started_ || stopping_) throw EngineShutdown("engine is not running");
  if (app.kind == AppSpec::Kind::NativeFunction && !AppRegistry::global().contains(app.name))
    throw UnknownAppError("app '" + app.name + "' is not registered");

  TaskRecord rec;
  rec.task_id = next_task_id_.fetch_add(1);
  rec.app = std::move(app);
  rec.args = std::move(args);
  rec.kwargs = std::move(kwargs);
  rec.retries_left = cfg_.max_retries;
  rec.executor_hint = opts.executor_hint;
  rec.memoize = opts.memoize;
  rec.submit_time = now_us();
  for (const auto& a : rec.args) collect_deps(a, rec.depends_on);
  for (const auto& [_, v] : rec.kwargs) collect_deps(v, rec.depends_on);

  FutureHandle fut = FutureHandle::make(rec.task_id);
  {
    std::lock_guard lk(done_mu_);
    ++submitted_;
  }
  Event ev;
  ev.kind = Event::Kind::Submit;
  ev.submit = std::make_shared<SubmitEv>(SubmitEv{std::move(rec), fut});
  post(std::move(ev));
  return fut;
}

FutureHandle Engine::declare_output(const FutureHandle& producer, const FileRef& ref) {
  std::string path = ref.uri;
  {
    std::lock_guard lk(snap_mu_);
    auto [it, inserted] = declared_outputs_.emplace(path, producer.task_id());
    if (!inserted)
      throw std::invalid_argument("output path '" + path + "' already declared by task " +
                                  std::to_string(it->second));
  }
  FutureHandle fut = FutureHandle::make(producer.task_id());
  Event ev;
  ev.kind = Event::Kind::OutputWatch;
  ev.watch = std::make_shared<OutputWatchEv>(OutputWatchEv{producer.task_id(), ref, fut});
  post(std::move(ev));
  return fut;
}

RunSummary Engine::wait_all() {
  std::unique_lock lk(done_mu_);
  done_cv_.wait(lk, [this] { return terminal_ >= submitted_; });
  return summary_;
}

void Engine::shutdown() {
  if (!started_ || stopping_) return;
  stopping_ = true;
  Event ev;
  ev.kind = Event::Kind::Stop;
  post(std::move(ev));
  if (loop_thread_.joinable()) loop_thread_.join();
  for (auto& ex : executors_) ex->shutdown();
  checkpoint_.close();
  if (cfg_.monitor) cfg_.monitor->flush();
}

void Engine::emit(MonitorEvent::Kind kind, std::uint64_t task_id,
                  std::map<std::string, std::string> detail) {
  if (!cfg_.monitor) return;
  MonitorEvent e;
  e.timestamp_us = now_us();
  e.task_id = task_id;
  e.kind = kind;
  e.detail = std::move(detail);
  cfg_.monitor->append(e);
}

void Engine::emit_stage_event(std::uint64_t task_id,
                              std::map<std::string, std::string> detail) {
  emit(MonitorEvent::Kind::StageEvent, task_id, std::move(detail));
}

void Engine::set_state(TaskEntry& t, TaskState to,
                       std::map<std::string, std::string> extra) {
  assert(task_transition_legal(t.record.state, to));
  extra["from"] = task_state_name(t.record.state);
  extra["to"] = task_state_name(to);
  t.record.state = to;
  emit(MonitorEvent::Kind::StateChange, t.record.task_id, std::move(extra));
}

std::int64_t Engine::next_deadline_us() const {
  std::int64_t best = 0;
  for (const auto& [_, t] : tasks_) {
    if (t.deadline_us > 0 && !task_state_terminal(t.record.state) &&
        (best == 0 || t.deadline_us < best))
      best = t.deadline_us;
  }
  return best;
}

void Engine::loop() {
  bool stop_seen = false;
  for (;;) {
    Event ev;
    {
      std::unique_lock lk(qmu_);
      if (cfg_.task_timeout_ms) {
        // Wake for the earliest in-flight deadline as well as for events.
        std::int64_t dl = next_deadline_us();
        if (dl > 0) {
          auto abs = std::chrono::steady_clock::time_point(
              std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                  std::chrono::microseconds(dl + t0_us_)));
          qcv_.wait_until(lk, abs, [this] { return !queue_.empty(); });
        } else {
          qcv_.wait(lk, [this] { return !queue_.empty(); });
        }
        if (queue_.empty()) {
          lk.unlock();
          check_timeouts();
          continue;
        }
      } else {
        qcv_.wait(lk, [this] { return !queue_.empty(); });
      }
      ev = std::move(queue_.front());
      queue_.pop_front();
    }
    switch (ev.kind) {
      case Event::Kind::Submit:
        handle_submit(*ev.submit);
        break;
      case Event::Kind::Completion:
        handle_completion(ev.completion.info);
        break;
      case Event::Kind::OutputWatch: {
        auto& w = ev.watch;
        auto it = tasks_.find(w->producer);
        if (it == tasks_.end()) {
          w->future.complete(Outcome::failure(ErrorKind::OutputMissing,
                                              "producer task not found"));
          break;
        }
        if (task_state_terminal(it->second.record.state)) {
          // Evaluate immediately against the already-finished producer.
          TaskEntry& t = it->second;
          bool ok = t.record.state != TaskState::Failed;
          FileRef staged = w->ref;
          if (ok && file_exists(w->ref.uri)) {
            staged.local_path = w->ref.uri;
            staged.staged = true;
            w->future.complete(Outcome::success(Value(staged)));
          } else {
            ErrorInfo err{ErrorKind::OutputMissing,
                          "task " + std::to_string(w->producer) +
                              " completed without creating " + w->ref.uri};
            w->future.complete(Outcome::failure(std::move(err)));
          }
        } else {
          it->second.output_watches.push_back(w);
        }
        break;
      }
      case Event::Kind::Stop:
        stop_seen = true;
        break;
    }
    if (stop_seen) break;
    if (cfg_.task_timeout_ms) check_timeouts();
  }

  // Unblock any remaining waiters when shut down mid-run.
  for (auto& [_, t] : tasks_) {
    if (!task_state_terminal(t.record.state))
      complete_task(t, Outcome::failure(ErrorKind::Shutdown, "engine shut down"),
                    TaskState::Failed, nullptr);
  }
}

void Engine::handle_submit(SubmitEv& ev) {
  std::uint64_t id = ev.record.task_id;
  TaskEntry& t = tasks_[id];
  t.record = std::move(ev.record);
  t.future = ev.future;
  emit(MonitorEvent::Kind::StateChange, id,
       {{"from", "-"}, {"to", task_state_name(TaskState::Pending)}, {"app", t.record.app.name}});

  for (std::uint64_t dep : t.record.depends_on) {
    auto it = tasks_.find(dep);
    if (it == tasks_.end()) {
      t.dep_failed = true;
      t.dep_error = ErrorInfo{ErrorKind::DependencyError,
                              "dependency " + std::to_string(dep) + " does not exist"};
      continue;
    }
    TaskEntry& d = it->second;
    if (task_state_terminal(d.record.state)) {
      if (d.record.state == TaskState::Failed) {
        t.dep_failed = true;
        t.dep_error = ErrorInfo{ErrorKind::DependencyError,
                                "dependency " + std::to_string(dep) + " failed"};
        auto root = d.outcome.error.detail.find("root_task");
        t.dep_error.detail["root_task"] = root != d.outcome.error.detail.end()
                                              ? root->second
                                              : std::to_string(dep);
      }
      // Successful terminal: already resolved, nothing to wait for.
    } else {
      d.dependents.push_back(id);
      ++t.unresolved;
    }
  }

  if (t.dep_failed) {
    complete_task(t, Outcome::failure(t.dep_error), TaskState::Failed, nullptr);
    return;
  }
  if (t.unresolved == 0) {
    set_state(t, TaskState::Launchable);
    dispatch(t);
  }
}

Value Engine::substitute(const Value& v) const {
  if (v.is<FutureRef>()) {
    auto it = tasks_.find(v.as<FutureRef>().task_id);
    assert(it != tasks_.end() && it->second.outcome.ok);
    return it->second.outcome.value;
  }
  if (v.is<ValueList>()) {
    ValueList out;
    out.reserve(v.as_list().size());
    for (const auto& e : v.as_list()) out.push_back(substitute(e));
    return Value(std::move(out));
  }
  if (v.is<ValueMap>()) {
    ValueMap out;
    for (const auto& [k, e] : v.as_map()) out.emplace(k, substitute(e));
    return Value(std::move(out));
  }
  return v;
}

void Engine::dispatch(TaskEntry& t) {
  // All dependencies resolved: replace future placeholders with values.
  for (auto& a : t.record.args) a = substitute(a);
  for (auto& [_, v] : t.record.kwargs) v = substitute(v);

  if (t.record.memoize) {
    if (t.record.memo_digest.empty())
      t.record.memo_digest = memo_key(t.record.app, t.record.args, t.record.kwargs);
    if (auto hit = memo_.lookup(t.record.memo_digest)) {
      complete_task(t, Outcome::success(std::move(*hit)), TaskState::MemoHit, nullptr);
      return;
    }
  }

  std::string label;
  if (t.record.executor_hint) {
    label = *t.record.executor_hint;
    if (!executors_by_label_.count(label)) {
      ErrorInfo err{ErrorKind::UnknownExecutor, "no executor labeled '" + label + "'"};
      complete_task(t, Outcome::failure(std::move(err)), TaskState::Failed, nullptr);
      return;
    }
  } else {
    label = pick_executor_label();
  }
  Executor* ex = executors_by_label_[label].get();

  TaskEnvelope env;
  env.task_id = t.record.task_id;
  env.attempt = t.record.attempts;
  env.app = t.record.app;
  env.args = t.record.args;
  env.kwargs = t.record.kwargs;

  t.record.launch_time = now_us();
  ++t.record.attempts;
  if (cfg_.task_timeout_ms)
    t.deadline_us = now_us() + *cfg_.task_timeout_ms * 1000;
  {
    std::lock_guard lk(snap_mu_);
    dispatch_log_.emplace_back(t.record.task_id, label);
    ++executor_submissions_;
  }
  emit(MonitorEvent::Kind::Dispatch, t.record.task_id,
       {{"executor", label}, {"attempt", std::to_string(env.attempt)}});
  set_state(t, TaskState::Launched, {{"executor", label}});
  try {
    ex->submit_task(std::move(env));
  } catch (const std::exception& e) {
    handle_completion(CompletionInfo{t.record.task_id, t.record.attempts - 1,
                                     Outcome::failure(ErrorKind::Shutdown, e.what()), 0, 0,
                                     "", -1});
  }
}

void Engine::handle_completion(const CompletionInfo& info) {
  auto it = tasks_.find(info.task_id);
  if (it == tasks_.end()) return;
  TaskEntry& t = it->second;
  if (task_state_terminal(t.record.state)) return;           // late duplicate
  if (info.attempt != t.record.attempts - 1) return;         // stale attempt
  if (t.record.state != TaskState::Launched && t.record.state != TaskState::Running)
    return;

  if (t.record.state == TaskState::Launched) set_state(t, TaskState::Running);

  if (info.outcome.ok) {
    complete_task(t, info.outcome, TaskState::Succeeded, &info);
    return;
  }
  bool retryable = info.outcome.error.kind != ErrorKind::DependencyError &&
                   info.outcome.error.kind != ErrorKind::Shutdown;
  if (retryable && t.record.retries_left > 0) {
    --t.record.retries_left;
    set_state(t, TaskState::Failed,
              {{"error", info.outcome.error.to_string()}, {"transient", "1"}});
    set_state(t, TaskState::Retrying);
    set_state(t, TaskState::Launchable);
    t.deadline_us = 0;
    dispatch(t);
    return;
  }
  complete_task(t, info.outcome, TaskState::Failed, &info);
}

void Engine::complete_task(TaskEntry& t, Outcome outcome, TaskState terminal,
                           const CompletionInfo* info) {
  t.record.complete_time = now_us();
  t.deadline_us = 0;
  t.outcome = std::move(outcome);

  std::map<std::string, std::string> detail;
  if (info) {
    detail["exec_start_us"] = std::to_string(info->exec_start_us - t0_us_);
    detail["exec_end_us"] = std::to_string(info->exec_end_us - t0_us_);
    if (!info->manager_id.empty()) detail["manager"] = info->manager_id;
    if (info->worker_index >= 0) detail["worker"] = std::to_string(info->worker_index);
  }
  if (!t.outcome.ok) detail["error"] = t.outcome.error.to_string();
  set_state(t, terminal, std::move(detail));

  if (terminal == TaskState::Succeeded && t.record.memoize) {
    if (t.record.memo_digest.empty())
      t.record.memo_digest = memo_key(t.record.app, t.record.args, t.record.kwargs);
    memo_.store(t.record.memo_digest, t.outcome.value);
    if (checkpoint_.is_open())
      checkpoint_.append(t.record.memo_digest, t.outcome.value, wall_us());
  }

  t.future.complete(t.outcome);

  for (auto& w : t.output_watches) {
    if (t.outcome.ok && file_exists(w->ref.uri)) {
      FileRef staged = w->ref;
      staged.local_path = w->ref.uri;
      staged.staged = true;
      w->future.complete(Outcome::success(Value(std::move(staged))));
    } else {
      ErrorInfo err{ErrorKind::OutputMissing,
                    "task " + std::to_string(t.record.task_id) +
                        " completed without creating " + w->ref.uri};
      w->future.complete(Outcome::failure(std::move(err)));
    }
  }
  t.output_watches.clear();

  {
    std::lock_guard lk(snap_mu_);
    finished_[t.record.task_id] = t.record;
  }
  {
    std::lock_guard lk(done_mu_);
    ++terminal_;
    if (terminal == TaskState::Succeeded) ++summary_.succeeded;
    else if (terminal == TaskState::MemoHit) ++summary_.memo_hits;
    else ++summary_.failed;
    if (terminal_ >= submitted_) done_cv_.notify_all();
  }

  if (terminal == TaskState::Failed) {
    fail_dependents(t);
  } else {
    fire_edges(t);
  }
}

void Engine::fail_dependents(TaskEntry& t) {
  // Taking a copy: completing a dependent recurses into its own dependents.
  std::vector<std::uint64_t> deps = t.dependents;
  std::string root = std::to_string(t.record.task_id);
  if (auto it = t.outcome.error.detail.find("root_task"); it != t.outcome.error.detail.end())
    root = it->second;
  for (std::uint64_t vid : deps) {
    auto it = tasks_.find(vid);
    if (it == tasks_.end() || task_state_terminal(it->second.record.state)) continue;
    ErrorInfo err{ErrorKind::DependencyError,
                  "dependency " + std::to_string(t.record.task_id) + " failed (root task " +
                      root + ")"};
    err.detail["root_task"] = root;
    err.detail["failed_dependency"] = std::to_string(t.record.task_id);
    // Dependency failures are final for the dependent: no launch happened, so
    // no retry budget is consumed.
    complete_task(it->second, Outcome::failure(std::move(err)), TaskState::Failed, nullptr);
  }
}

void Engine::fire_edges(TaskEntry& t) {
  std::vector<std::uint64_t> deps = t.dependents;
  for (std::uint64_t vid : deps) {
    auto it = tasks_.find(vid);
    if (it == tasks_.end()) continue;
    TaskEntry& v = it->second;
    if (task_state_terminal(v.record.state)) continue;
    if (v.unresolved == 0) continue;
    if (--v.unresolved == 0) {
      set_state(v, TaskState::Launchable);
      dispatch(v);
    }
  }
}

void Engine::check_timeouts() {
  if (!cfg_.task_timeout_ms) return;
  std::int64_t now = now_us();
  std::vector<std::uint64_t> expired;
  for (auto& [id, t] : tasks_) {
    if (t.deadline_us > 0 && t.deadline_us <= now &&
        (t.record.state == TaskState::Launched || t.record.state == TaskState::Running))
      expired.push_back(id);
  }
  for (std::uint64_t id : expired) {
    TaskEntry& t = tasks_[id];
    CompletionInfo info;
    info.task_id = id;
    info.attempt = t.record.attempts - 1;
    info.outcome = Outcome::failure(
        ErrorKind::Timeout, "task exceeded timeout of " +
                                std::to_string(*cfg_.task_timeout_ms) + " ms");
    handle_completion(info);
  }
}

TaskRecord Engine::task_snapshot(std::uint64_t task_id) const {
  std::lock_guard lk(snap_mu_);
  auto it = finished_.find(task_id);
  if (it != finished_.end()) return it->second;
  return TaskRecord{};
}

std::vector<std::pair<std::uint64_t, std::string>> Engine::dispatch_log() const {
  std::lock_guard lk(snap_mu_);
  return dispatch_log_;
}

std::size_t Engine::executor_submissions() const {
  std::lock_guard lk(snap_mu_);
  return executor_submissions_;
}

std::size_t Engine::memo_hits() const {
  std::lock_guard lk(done_mu_);
  return summary_.memo_hits;
}

}  // namespace parex
