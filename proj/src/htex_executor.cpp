// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/htex_executor.hpp"

#include <fcntl.h>
#include <signal.h>
#include <unistd.h>

#include <cstdlib>
#include <cstring>
#include <filesystem>

#include "parex/clock.hpp"
#include "parex/net.hpp"
#include "parex/wire.hpp"

namespace parex {

namespace {

std::string default_agent_path() {
  if (const char* env = std::getenv("PAREX_AGENT")) return env;
  std::string self = self_exe_path();
  auto slash = self.find_last_of('/');
  if (slash != std::string::npos) {
    std::string sibling = self.substr(0, slash) + "/parex-agent";
    if (::access(sibling.c_str(), X_OK) == 0) return sibling;
  }
  return "parex-agent";
}

std::string default_sandbox_root(const std::string& label) {
  return "/tmp/parex-" + label + "-" + std::to_string(::getpid());
}

}  // namespace

HtexExecutor::HtexExecutor(HtexConfig cfg, std::shared_ptr<Provider> provider)
    : Executor(cfg.label), cfg_(std::move(cfg)), provider_(std::move(provider)) {
  if (cfg_.heartbeat_threshold_ms <= cfg_.heartbeat_period_ms)
    throw std::invalid_argument("heartbeat_threshold must exceed heartbeat_period");
  if (cfg_.agent_path.empty()) cfg_.agent_path = default_agent_path();
  if (cfg_.sandbox_root.empty()) cfg_.sandbox_root = default_sandbox_root(cfg_.label);
}

HtexExecutor::~HtexExecutor() { shutdown(); }

void HtexExecutor::start() {
  if (status_ != ExecutorStatus::Starting) return;
  ::signal(SIGPIPE, SIG_IGN);
  std::filesystem::create_directories(cfg_.sandbox_root);

  // Interchange process; its stdout hands us the ports it bound.
  int out_pipe[2];
  if (::pipe(out_pipe) != 0) throw std::runtime_error("pipe failed");
  SpawnOptions opts;
  opts.kill_on_parent_death = true;
  opts.stdout_pipe_fd = out_pipe[1];
  ix_pid_ = spawn_process(
      {cfg_.agent_path, "interchange", "--hb-period",
       std::to_string(cfg_.heartbeat_period_ms), "--hb-threshold",
       std::to_string(cfg_.heartbeat_threshold_ms), "--batch-max",
       std::to_string(cfg_.batch_size_max), "--seed", std::to_string(cfg_.seed)},
      opts);
  ::close(out_pipe[1]);

  std::string line;
  char ch;
  std::int64_t deadline = monotonic_us() + 10'000'000;
  while (monotonic_us() < deadline) {
    ssize_t n = ::read(out_pipe[0], &ch, 1);
    if (n <= 0) break;
    if (ch == '\n') break;
    line.push_back(ch);
  }
  ::close(out_pipe[0]);
  unsigned task_p = 0, cmd_p = 0;
  if (std::sscanf(line.c_str(), "PAREX_IX task=%u cmd=%u", &task_p, &cmd_p) != 2)
    throw std::runtime_error("interchange failed to start (agent: " + cfg_.agent_path +
                             ", got '" + line + "')");
  task_port_ = std::uint16_t(task_p);
  cmd_port_ = std::uint16_t(cmd_p);

  task_fd_ = net::connect_tcp("127.0.0.1", task_port_);
  ValueMap reg = net::msg_of(wire::kRegister);
  reg["role"] = Value(std::string("client"));
  net::send_frame_blocking(task_fd_, reg);
  cmd_fd_ = net::connect_tcp("127.0.0.1", cmd_port_);

  if (::pipe2(wake_pipe_, O_NONBLOCK) != 0) throw std::runtime_error("pipe failed");
  io_thread_ = std::thread([this] { io_loop(); });

  scale_out(cfg_.init_blocks);
  status_ = ExecutorStatus::Running;
}

std::vector<std::string> HtexExecutor::manager_argv() const {
  return {cfg_.agent_path,
          "manager",
          "--interchange",
          "127.0.0.1:" + std::to_string(task_port_),
          "--workers",
          std::to_string(cfg_.workers_per_node),
          "--prefetch",
          std::to_string(cfg_.prefetch_capacity),
          "--hb-period",
          std::to_string(cfg_.heartbeat_period_ms),
          "--hb-threshold",
          std::to_string(cfg_.heartbeat_threshold_ms),
          "--sandbox",
          cfg_.sandbox_root};
}

int HtexExecutor::scale_out(int blocks) {
  int launched = 0;
  for (int i = 0; i < blocks; ++i) {
    std::string handle = provider_->submit(manager_argv(), cfg_.nodes_per_block);
    {
      std::lock_guard lk(track_mu_);
      tracked_blocks_[handle].last_nonidle_us = monotonic_us();
    }
    if (monitor_) {
      MonitorEvent e;
      e.timestamp_us = monotonic_us() - monitor_t0_us_;
      e.kind = MonitorEvent::Kind::BlockEvent;
      e.detail = {{"event", "requested"}, {"block", handle}, {"executor", label_}};
      monitor_->append(e);
    }
    ++launched;
  }
  return launched;
}

int HtexExecutor::scale_in(const std::vector<std::string>& block_ids) {
  int stopped = 0;
  for (const auto& handle : block_ids) {
    std::vector<std::string> managers;
    {
      std::lock_guard lk(track_mu_);
      auto it = tracked_blocks_.find(handle);
      if (it != tracked_blocks_.end())
        managers.assign(it->second.managers.begin(), it->second.managers.end());
    }
    // Drain managers first so nothing new lands on them, then reclaim.
    for (const auto& m : managers) {
      ValueMap c = net::msg_of(wire::kCmd);
      c["cmd"] = Value(std::string("TERMINATE_MANAGER"));
      c["manager_id"] = Value(m);
      try {
        command(std::move(c));
      } catch (const std::exception&) {
      }
    }
    provider_->cancel(handle);
    if (monitor_) {
      MonitorEvent e;
      e.timestamp_us = monotonic_us() - monitor_t0_us_;
      e.kind = MonitorEvent::Kind::BlockEvent;
      e.detail = {{"event", "cancelled"}, {"block", handle}, {"executor", label_}};
      monitor_->append(e);
    }
    ++stopped;
  }
  return stopped;
}

void HtexExecutor::submit_task(TaskEnvelope env) {
  if (status_ == ExecutorStatus::Stopped || status_ == ExecutorStatus::Draining)
    throw ExecutorShutdown("executor '" + label_ + "' is shut down");
  {
    std::lock_guard lk(outbox_mu_);
    outbox_.push_back(std::move(env));
  }
  pending_.fetch_add(1);
  char b = 1;
  (void)!::write(wake_pipe_[1], &b, 1);
}

std::size_t HtexExecutor::pending_count() const { return pending_.load(); }

void HtexExecutor::io_loop() {
  net::FrameConn conn(task_fd_);
  net::Poller poller;
  while (!stop_.load()) {
    {
      std::lock_guard lk(outbox_mu_);
      if (!outbox_.empty()) {
        ValueList tasks;
        for (auto& env : outbox_) {
          ValueMap t;
          t["id"] = Value(std::int64_t(env.task_id));
          t["attempt"] = Value(std::int64_t(env.attempt));
          t["payload"] = Value(Bytes{encode(Value(envelope_to_map(env)))});
          tasks.emplace_back(std::move(t));
        }
        outbox_.clear();
        ValueMap batch = net::msg_of(wire::kTaskBatch);
        batch["tasks"] = Value(std::move(tasks));
        conn.send(batch);
      }
    }

    poller.clear();
    poller.add(conn.fd(), POLLIN | (conn.wants_send() ? POLLOUT : 0));
    poller.add(wake_pipe_[0], POLLIN);
    const auto& ready = poller.wait(50);
    for (const auto& p : ready) {
      if (p.fd == wake_pipe_[0] && (p.revents & POLLIN)) {
        char buf[256];
        while (::read(wake_pipe_[0], buf, sizeof(buf)) > 0) {
        }
      }
      if (p.fd == conn.fd()) {
        if (p.revents & POLLOUT) conn.pump_send();
        if (p.revents & (POLLIN | POLLHUP | POLLERR)) {
          if (!conn.pump_recv() && conn.closed()) return;  // interchange gone
          while (auto f = conn.next_frame()) handle_frame(*f);
        }
      }
    }
  }
}

void HtexExecutor::handle_frame(const ValueMap& msg) {
  std::string type = map_str(msg, "type");
  if (type == wire::kResultBatch) {
    auto rs = msg.find("results");
    if (rs == msg.end() || !rs->second.is<ValueList>()) return;
    for (const Value& r : rs->second.as_list()) {
      if (!r.is<ValueMap>()) continue;
      CompletionInfo info = completion_from_map(r.as_map());
      {
        std::lock_guard lk(track_mu_);
        auto bit = manager_block_.find(info.manager_id);
        if (bit != manager_block_.end())
          tracked_blocks_[bit->second].last_nonidle_us = monotonic_us();
      }
      deliver_completion(std::move(info));
    }
  } else if (type == wire::kManagerLost) {
    std::string manager = map_str(msg, "manager_id");
    auto ts = msg.find("tasks");
    if (ts != msg.end() && ts->second.is<ValueList>()) {
      for (const Value& t : ts->second.as_list()) {
        if (!t.is<ValueMap>()) continue;
        CompletionInfo info;
        info.task_id = std::uint64_t(map_int(t.as_map(), "id"));
        info.attempt = int(map_int(t.as_map(), "attempt"));
        info.manager_id = manager;
        ErrorInfo err{ErrorKind::ManagerLost,
                      "manager " + manager + " lost (" + map_str(msg, "reason") + ") with task in flight"};
        err.detail["manager"] = manager;
        info.outcome = Outcome::failure(std::move(err));
        deliver_completion(std::move(info));
      }
    }
  } else if (type == wire::kManagerEvent) {
    note_manager(map_str(msg, "event"), msg);
  }
}

void HtexExecutor::deliver_completion(CompletionInfo info) {
  pending_.fetch_sub(1);
  deliver(std::move(info));
}

void HtexExecutor::note_manager(const std::string& event, const ValueMap& msg) {
  std::string manager = map_str(msg, "manager_id");
  std::string block = map_str(msg, "block_id");
  {
    std::lock_guard lk(track_mu_);
    if (event == "register") {
      manager_block_[manager] = block;
      manager_capacity_[manager] = map_int(msg, "capacity", 1);
      auto& t = tracked_blocks_[block];
      t.managers.insert(manager);
      t.last_nonidle_us = monotonic_us();
    } else if (event == "gone") {
      manager_capacity_.erase(manager);
      auto bit = manager_block_.find(manager);
      if (bit != manager_block_.end()) {
        auto tb = tracked_blocks_.find(bit->second);
        if (tb != tracked_blocks_.end()) tb->second.managers.erase(manager);
        manager_block_.erase(bit);
      }
    }
  }
  if (monitor_) {
    MonitorEvent e;
    e.timestamp_us = monotonic_us() - monitor_t0_us_;
    e.kind = MonitorEvent::Kind::ManagerEvent;
    e.detail = {{"event", event},
                {"manager_id", manager},
                {"block", block},
                {"executor", label_},
                {"workers", std::to_string(map_int(msg, "workers", 1))}};
    monitor_->append(e);
  }
}

ValueMap HtexExecutor::command(ValueMap cmd) {
  std::lock_guard lk(cmd_mu_);
  if (cmd_fd_ < 0) throw std::runtime_error("command channel closed");
  cmd["type"] = Value(std::string(wire::kCmd));
  net::send_frame_blocking(cmd_fd_, cmd);
  auto reply = net::recv_frame_blocking(cmd_fd_, 5000);
  if (!reply) throw std::runtime_error("interchange closed command channel");
  return *reply;
}

std::map<std::string, std::int64_t> HtexExecutor::outstanding_per_manager() {
  ValueMap c = net::msg_of(wire::kCmd);
  c["cmd"] = Value(std::string("OUTSTANDING"));
  ValueMap reply = command(std::move(c));
  std::map<std::string, std::int64_t> out;
  if (auto it = reply.find("outstanding"); it != reply.end() && it->second.is<ValueMap>())
    for (const auto& [k, v] : it->second.as_map())
      if (v.is<std::int64_t>()) out[k] = v.as_int();
  return out;
}

bool HtexExecutor::blacklist_manager(const std::string& manager_id) {
  ValueMap c = net::msg_of(wire::kCmd);
  c["cmd"] = Value(std::string("BLACKLIST"));
  c["manager_id"] = Value(manager_id);
  return map_bool(command(std::move(c)), "ok");
}

std::int64_t HtexExecutor::connected_slots() {
  ValueMap c = net::msg_of(wire::kCmd);
  c["cmd"] = Value(std::string("CAPACITY"));
  return map_int(command(std::move(c)), "slots");
}

bool HtexExecutor::wait_for_capacity(int slots, int timeout_ms) {
  std::int64_t deadline = monotonic_us() + std::int64_t(timeout_ms) * 1000;
  while (monotonic_us() < deadline) {
    try {
      if (connected_slots() >= slots) return true;
    } catch (const std::exception&) {
      return false;
    }
    sleep_ms(20);
  }
  return false;
}

LoadSnapshot HtexExecutor::load_snapshot() {
  LoadSnapshot snap;
  snap.outstanding_tasks = pending_.load();

  std::map<std::string, std::int64_t> per_manager;
  try {
    per_manager = outstanding_per_manager();
  } catch (const std::exception&) {
  }

  std::int64_t now = monotonic_us();
  std::lock_guard lk(track_mu_);
  for (const auto& [m, cap] : manager_capacity_) snap.active_slots += std::size_t(cap);

  for (const auto& handle : provider_->handles()) {
    BlockState st = provider_->status(handle);
    if (st == BlockState::Requested || st == BlockState::Queued) {
      ++snap.pending_blocks;
      continue;
    }
    if (st != BlockState::Active) continue;
    ++snap.active_blocks;
    auto& track = tracked_blocks_[handle];
    std::int64_t busy = 0;
    for (const auto& m : track.managers) {
      auto it = per_manager.find(m);
      if (it != per_manager.end()) busy += it->second;
    }
    if (busy > 0) track.last_nonidle_us = now;
    snap.idle_block_ages.emplace_back(handle,
                                      busy > 0 ? 0 : now - track.last_nonidle_us);
  }
  return snap;
}

std::vector<BlockStatusInfo> HtexExecutor::blocks() const {
  std::vector<BlockStatusInfo> out;
  for (const auto& handle : provider_->handles()) {
    BlockStatusInfo b;
    b.block_id = handle;
    b.state = block_state_name(provider_->status(handle));
    b.nodes = cfg_.nodes_per_block;
    out.push_back(std::move(b));
  }
  return out;
}

void HtexExecutor::attach_monitor(SinkIface* sink, std::int64_t t0_us) {
  monitor_ = sink;
  monitor_t0_us_ = t0_us;
}

void HtexExecutor::shutdown() {
  ExecutorStatus expect = ExecutorStatus::Running;
  if (!status_.compare_exchange_strong(expect, ExecutorStatus::Draining)) {
    if (expect == ExecutorStatus::Starting) status_ = ExecutorStatus::Stopped;
    return;
  }
  // Ask the interchange to drain managers, then reclaim every block.
  try {
    ValueMap c = net::msg_of(wire::kCmd);
    c["cmd"] = Value(std::string("SHUTDOWN"));
    command(std::move(c));
  } catch (const std::exception&) {
  }
  stop_ = true;
  char b = 1;
  (void)!::write(wake_pipe_[1], &b, 1);
  if (io_thread_.joinable()) io_thread_.join();

  for (const auto& handle : provider_->handles()) provider_->cancel(handle);
  if (ix_pid_ > 0) terminate_process(ix_pid_, 500);
  if (cmd_fd_ >= 0) net::close_fd(cmd_fd_);
  cmd_fd_ = -1;
  net::close_fd(wake_pipe_[0]);
  net::close_fd(wake_pipe_[1]);
  status_ = ExecutorStatus::Stopped;
}

}  // namespace parex
