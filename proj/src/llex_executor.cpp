// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/llex_executor.hpp"

#include <signal.h>
#include <unistd.h>

#include <cstdio>
#include <filesystem>

#include "parex/clock.hpp"
#include "parex/net.hpp"
#include "parex/wire.hpp"

namespace parex {

namespace {

std::string default_agent() {
  if (const char* env = std::getenv("PAREX_AGENT")) return env;
  std::string self = self_exe_path();
  auto slash = self.find_last_of('/');
  if (slash != std::string::npos) {
    std::string sibling = self.substr(0, slash) + "/parex-agent";
    if (::access(sibling.c_str(), X_OK) == 0) return sibling;
  }
  return "parex-agent";
}

}  // namespace

LlexExecutor::LlexExecutor(LlexConfig cfg, std::shared_ptr<Provider> provider)
    : Executor(cfg.label), cfg_(std::move(cfg)), provider_(std::move(provider)) {
  if (cfg_.replication_factor < 1)
    throw std::invalid_argument("replication_factor must be >= 1");
  if (cfg_.agent_path.empty()) cfg_.agent_path = default_agent();
  if (cfg_.sandbox_root.empty())
    cfg_.sandbox_root = "/tmp/parex-" + cfg_.label + "-" + std::to_string(::getpid());
}

LlexExecutor::~LlexExecutor() { shutdown(); }

void LlexExecutor::start() {
  if (status_ != ExecutorStatus::Starting) return;
  ::signal(SIGPIPE, SIG_IGN);
  std::filesystem::create_directories(cfg_.sandbox_root);

  int out_pipe[2];
  if (::pipe(out_pipe) != 0) throw std::runtime_error("pipe failed");
  SpawnOptions opts;
  opts.kill_on_parent_death = true;
  opts.stdout_pipe_fd = out_pipe[1];
  relay_pid_ = spawn_process({cfg_.agent_path, "llex-relay"}, opts);
  ::close(out_pipe[1]);

  std::string line;
  char ch;
  while (::read(out_pipe[0], &ch, 1) == 1 && ch != '\n') line.push_back(ch);
  ::close(out_pipe[0]);
  unsigned cp = 0, wp = 0;
  if (std::sscanf(line.c_str(), "PAREX_LLEX client=%u worker=%u", &cp, &wp) != 2)
    throw std::runtime_error("llex relay failed to start (got '" + line + "')");
  client_port_ = std::uint16_t(cp);
  worker_port_ = std::uint16_t(wp);

  fd_ = net::connect_tcp("127.0.0.1", client_port_);

  // Fixed pool: provisioning during the run would dominate latency, so every
  // worker exists before the first task.
  for (int i = 0; i < cfg_.workers; ++i)
    provider_->submit({cfg_.agent_path, "llex-worker", "--relay",
                       "127.0.0.1:" + std::to_string(worker_port_), "--sandbox",
                       cfg_.sandbox_root, "--index", std::to_string(i)},
                      1);

  io_thread_ = std::thread([this] { io_loop(); });
  status_ = ExecutorStatus::Running;
}

bool LlexExecutor::wait_for_workers(int count, int timeout_ms) {
  std::int64_t deadline = monotonic_us() + std::int64_t(timeout_ms) * 1000;
  while (monotonic_us() < deadline) {
    try {
      ValueMap m = introspect();
      if (map_int(m, "idle_workers") + map_int(m, "busy_workers") >= count) return true;
    } catch (const std::exception&) {
      return false;
    }
    sleep_ms(10);
  }
  return false;
}

ValueMap LlexExecutor::introspect() {
  // Route the reply through the io thread's pending map? No: INTROSPECT is a
  // synchronous side channel on its own connection to keep routing simple.
  int fd = net::connect_tcp("127.0.0.1", client_port_);
  ValueMap cmd = net::msg_of(wire::kCmd);
  cmd["cmd"] = Value(std::string("INTROSPECT"));
  net::send_frame_blocking(fd, cmd);
  auto reply = net::recv_frame_blocking(fd, 3000);
  net::close_fd(fd);
  if (!reply) throw std::runtime_error("relay closed");
  return *reply;
}

void LlexExecutor::send_copies(const TaskEnvelope& env, int retry) {
  Bytes payload{encode(Value(envelope_to_map(env)))};
  std::lock_guard lk(send_mu_);
  for (int replica = 0; replica < cfg_.replication_factor; ++replica) {
    ValueMap t = net::msg_of(wire::kTask);
    t["id"] = Value(std::int64_t(env.task_id));
    t["attempt"] = Value(std::int64_t(env.attempt));
    t["replica"] = Value(std::int64_t(replica));
    t["retry"] = Value(std::int64_t(retry));
    t["payload"] = Value(payload);
    t["hops"] = Value(std::int64_t(1));
    net::send_frame_blocking(fd_, t);
  }
}

void LlexExecutor::submit_task(TaskEnvelope env) {
  if (status_ != ExecutorStatus::Running)
    throw ExecutorShutdown("executor '" + label_ + "' is shut down");
  auto key = std::make_pair(env.task_id, env.attempt);
  {
    std::lock_guard lk(pending_mu_);
    PendingAttempt& p = pending_[key];
    p.env = env;
    p.retries_left = cfg_.max_timed_retries;
    p.done = false;
    p.deadline_us =
        cfg_.task_timeout_ms > 0 ? monotonic_us() + std::int64_t(cfg_.task_timeout_ms) * 1000
                                 : 0;
  }
  in_flight_.fetch_add(1);
  send_copies(env, 0);
}

std::size_t LlexExecutor::pending_count() const { return in_flight_.load(); }

void LlexExecutor::handle_result(const ValueMap& msg) {
  CompletionInfo info = completion_from_map(msg);
  last_hops_.store(map_int(msg, "hops"));
  auto key = std::make_pair(info.task_id, info.attempt);
  {
    std::lock_guard lk(pending_mu_);
    auto it = pending_.find(key);
    if (it == pending_.end() || it->second.done) {
      // Late replica of something already surfaced: discard.
      duplicates_.fetch_add(1);
      return;
    }
    it->second.done = true;
    it->second.expire_us =
        monotonic_us() + 2 * std::int64_t(std::max(cfg_.task_timeout_ms, 1000)) * 1000;
  }
  info.manager_id = "llex";
  in_flight_.fetch_sub(1);
  deliver(std::move(info));
}

void LlexExecutor::check_deadlines() {
  if (cfg_.task_timeout_ms <= 0) return;
  std::int64_t now = monotonic_us();
  std::vector<TaskEnvelope> resend;
  std::vector<CompletionInfo> timeouts;
  std::vector<std::pair<TaskEnvelope, int>> retries;
  {
    std::lock_guard lk(pending_mu_);
    for (auto it = pending_.begin(); it != pending_.end();) {
      PendingAttempt& p = it->second;
      if (p.done) {
        if (p.expire_us > 0 && now >= p.expire_us) {
          it = pending_.erase(it);  // dedup memory stays bounded
          continue;
        }
        ++it;
        continue;
      }
      if (p.deadline_us > 0 && now >= p.deadline_us) {
        if (p.retries_left > 0) {
          --p.retries_left;
          p.deadline_us = now + std::int64_t(cfg_.task_timeout_ms) * 1000;
          retries.emplace_back(p.env, cfg_.max_timed_retries - p.retries_left);
        } else {
          p.done = true;
          p.expire_us = now + 2 * std::int64_t(cfg_.task_timeout_ms) * 1000;
          CompletionInfo info;
          info.task_id = p.env.task_id;
          info.attempt = p.env.attempt;
          ErrorInfo err{ErrorKind::Timeout,
                        "no result within " + std::to_string(cfg_.task_timeout_ms) +
                            " ms after " + std::to_string(cfg_.max_timed_retries) +
                            " timed retries"};
          info.outcome = Outcome::failure(std::move(err));
          timeouts.push_back(std::move(info));
        }
      }
      ++it;
    }
  }
  for (auto& [env, retry] : retries) send_copies(env, retry);
  for (auto& info : timeouts) {
    in_flight_.fetch_sub(1);
    deliver(std::move(info));
  }
}

void LlexExecutor::io_loop() {
  net::set_nonblocking(fd_, true);
  net::FrameConn conn(fd_);
  net::Poller poller;
  while (!stop_.load()) {
    poller.clear();
    poller.add(conn.fd(), POLLIN | (conn.wants_send() ? POLLOUT : 0));
    int timeout = cfg_.task_timeout_ms > 0 ? std::min(20, cfg_.task_timeout_ms) : 50;
    const auto& ready = poller.wait(timeout);
    for (const auto& p : ready) {
      if (p.fd != conn.fd() || p.revents == 0) continue;
      if (p.revents & POLLOUT) conn.pump_send();
      if (p.revents & (POLLIN | POLLHUP | POLLERR)) {
        if (!conn.pump_recv() && conn.closed()) return;
        while (auto f = conn.next_frame()) {
          if (map_str(*f, "type") == wire::kResult) handle_result(*f);
        }
      }
    }
    check_deadlines();
  }
}

LoadSnapshot LlexExecutor::load_snapshot() {
  LoadSnapshot s;
  s.outstanding_tasks = in_flight_.load();
  s.active_slots = std::size_t(cfg_.workers);
  s.active_blocks = std::size_t(cfg_.workers);
  return s;
}

void LlexExecutor::shutdown() {
  ExecutorStatus expect = ExecutorStatus::Running;
  if (!status_.compare_exchange_strong(expect, ExecutorStatus::Draining)) {
    if (expect == ExecutorStatus::Starting) status_ = ExecutorStatus::Stopped;
    return;
  }
  stop_ = true;
  if (io_thread_.joinable()) io_thread_.join();
  for (const auto& handle : provider_->handles()) provider_->cancel(handle);
  if (relay_pid_ > 0) terminate_process(relay_pid_, 200);
  status_ = ExecutorStatus::Stopped;
}

}  // namespace parex
