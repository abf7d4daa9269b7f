// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/htex_agent.hpp"

#include <signal.h>
#include <sys/socket.h>
#include <unistd.h>

#include <algorithm>
#include <cstdio>
#include <deque>
#include <map>
#include <memory>
#include <mutex>
#include <random>
#include <set>
#include <thread>
#include <vector>

#include "parex/clock.hpp"
#include "parex/exec_kernel.hpp"
#include "parex/net.hpp"
#include "parex/proc.hpp"
#include "parex/wire.hpp"

namespace parex {

using net::FrameConn;

std::string random_id() {
  static const char* hex = "0123456789abcdef";
  std::random_device rd;
  std::mt19937_64 rng(std::uint64_t(rd()) << 32 | rd());
  std::string out(16, '0');
  for (auto& c : out) c = hex[rng() & 0xf];
  return out;
}

// ===========================================================================
// Interchange

namespace {

struct PendingTask {
  std::int64_t id;
  std::int64_t attempt;
  Value payload;
};

struct ManagerState {
  std::unique_ptr<FrameConn> conn;
  std::string id;
  std::string block_id;
  int capacity = 0;
  int workers = 0;
  std::map<std::int64_t, std::int64_t> outstanding;  // task id -> attempt
  std::int64_t last_rx_us = 0;
  bool blacklisted = false;
  bool draining = false;
};

class Interchange {
 public:
  explicit Interchange(const InterchangeConfig& cfg) : cfg_(cfg), rng_(cfg.seed) {}

  int run() {
    ::signal(SIGPIPE, SIG_IGN);
    std::uint16_t task_port = 0, cmd_port = 0;
    task_listen_ = net::listen_tcp(cfg_.task_port, &task_port);
    cmd_listen_ = net::listen_tcp(cfg_.cmd_port, &cmd_port);
    std::printf("PAREX_IX task=%u cmd=%u\n", task_port, cmd_port);
    std::fflush(stdout);

    std::int64_t last_hb_us = monotonic_us();
    while (!stop_) {
      poll_once();
      std::int64_t now = monotonic_us();
      if (now - last_hb_us >= std::int64_t(cfg_.heartbeat_period_ms) * 1000) {
        last_hb_us = now;
        for (auto& [_, m] : managers_) m->conn->send(net::msg_of(wire::kHeartbeat));
      }
      reap_lost(now);
      match();
    }
    // Drain: tell managers to finish up and go.
    for (auto& [_, m] : managers_) m->conn->send(net::msg_of(wire::kShutdown));
    sleep_ms(50);
    return 0;
  }

 private:
  void poll_once() {
    poller_.clear();
    poller_.add(task_listen_, POLLIN);
    poller_.add(cmd_listen_, POLLIN);
    if (client_) poller_.add(client_->fd(), POLLIN | (client_->wants_send() ? POLLOUT : 0));
    for (auto& [fd, c] : unclassified_) poller_.add(fd, POLLIN);
    for (auto& [fd, m] : managers_)
      poller_.add(fd, POLLIN | (m->conn->wants_send() ? POLLOUT : 0));
    for (auto& [fd, c] : cmd_conns_) poller_.add(fd, POLLIN);

    int timeout = std::min(50, std::max(5, cfg_.heartbeat_period_ms / 4));
    const auto& ready = poller_.wait(timeout);
    for (const auto& p : ready) {
      if (p.revents == 0) continue;
      if (p.fd == task_listen_) {
        int fd;
        while ((fd = net::accept_conn(task_listen_)) >= 0)
          unclassified_.emplace(fd, std::make_unique<FrameConn>(fd));
        continue;
      }
      if (p.fd == cmd_listen_) {
        int fd;
        while ((fd = net::accept_conn(cmd_listen_)) >= 0)
          cmd_conns_.emplace(fd, std::make_unique<FrameConn>(fd));
        continue;
      }
      if (client_ && p.fd == client_->fd()) {
        if (p.revents & POLLOUT) client_->pump_send();
        if (p.revents & (POLLIN | POLLHUP | POLLERR)) pump_client();
        continue;
      }
      if (auto it = unclassified_.find(p.fd); it != unclassified_.end()) {
        pump_unclassified(it->first);
        continue;
      }
      if (auto it = managers_.find(p.fd); it != managers_.end()) {
        if (p.revents & POLLOUT) it->second->conn->pump_send();
        if (p.revents & (POLLIN | POLLHUP | POLLERR)) pump_manager(it->first);
        continue;
      }
      if (auto it = cmd_conns_.find(p.fd); it != cmd_conns_.end()) pump_cmd(it->first);
    }
  }

  void pump_unclassified(int fd) {
    auto it = unclassified_.find(fd);
    FrameConn* c = it->second.get();
    if (!c->pump_recv() && !c->wants_send()) {
      // Might still hold a buffered REGISTER; fall through to frame pop.
    }
    while (auto f = c->next_frame()) {
      const ValueMap& m = *f;
      if (map_str(m, "type") != wire::kRegister) continue;
      std::string role = map_str(m, "role");
      if (role == "client") {
        client_ = std::move(it->second);
        unclassified_.erase(it);
        client_seen_ = true;
        return;
      }
      if (role == "manager") {
        auto ms = std::make_unique<ManagerState>();
        ms->conn = std::move(it->second);
        ms->id = map_str(m, "manager_id");
        ms->block_id = map_str(m, "block_id");
        ms->capacity = int(map_int(m, "capacity", 1));
        ms->workers = int(map_int(m, "workers", 1));
        ms->last_rx_us = monotonic_us();
        notify_manager_event("register", *ms);
        managers_.emplace(fd, std::move(ms));
        unclassified_.erase(it);
        return;
      }
    }
    if (c->closed()) unclassified_.erase(fd);
  }

  void pump_client() {
    bool open = client_->pump_recv();
    while (auto f = client_->next_frame()) {
      const ValueMap& m = *f;
      if (map_str(m, "type") != wire::kTaskBatch) continue;
      auto it = m.find("tasks");
      if (it == m.end() || !it->second.is<ValueList>()) continue;
      for (const Value& t : it->second.as_list()) {
        if (!t.is<ValueMap>()) continue;
        const ValueMap& tm = t.as_map();
        PendingTask pt;
        pt.id = map_int(tm, "id");
        pt.attempt = map_int(tm, "attempt");
        auto pl = tm.find("payload");
        pt.payload = pl != tm.end() ? pl->second : Value();
        queue_.push_back(std::move(pt));
      }
    }
    if (!open || client_->closed()) {
      // The submitting program is gone; there is nobody to serve.
      if (client_seen_) stop_ = true;
      client_.reset();
    }
  }

  void pump_manager(int fd) {
    auto it = managers_.find(fd);
    ManagerState& m = *it->second;
    bool open = m.conn->pump_recv();
    while (auto f = m.conn->next_frame()) {
      m.last_rx_us = monotonic_us();
      const ValueMap& msg = *f;
      std::string type = map_str(msg, "type");
      if (type == wire::kResultBatch) {
        auto rs = msg.find("results");
        if (rs == msg.end() || !rs->second.is<ValueList>()) continue;
        ValueList forwarded;
        for (const Value& r : rs->second.as_list()) {
          if (!r.is<ValueMap>()) continue;
          ValueMap rm = r.as_map();
          rm["manager"] = Value(m.id);
          m.outstanding.erase(map_int(rm, "id"));
          forwarded.emplace_back(std::move(rm));
        }
        if (client_ && !forwarded.empty()) {
          ValueMap out = net::msg_of(wire::kResultBatch);
          out["results"] = Value(std::move(forwarded));
          client_->send(out);
        }
      }
      // Heartbeats (and any other traffic) just refresh last_rx_us.
    }
    if (!open || m.conn->closed()) lose_manager(fd, "disconnect");
  }

  void pump_cmd(int fd) {
    auto it = cmd_conns_.find(fd);
    FrameConn* c = it->second.get();
    bool open = c->pump_recv();
    while (auto f = c->next_frame()) {
      ValueMap reply = net::msg_of(wire::kCmdReply);
      reply["ok"] = Value(true);
      std::string cmd = map_str(*f, "cmd");
      if (cmd == "OUTSTANDING") {
        ValueMap per;
        for (auto& [_, m] : managers_)
          per[m->id] = Value(std::int64_t(m->outstanding.size()));
        reply["outstanding"] = Value(std::move(per));
        reply["queued"] = Value(std::int64_t(queue_.size()));
      } else if (cmd == "BLACKLIST") {
        ManagerState* m = find_manager(map_str(*f, "manager_id"));
        if (!m) {
          reply["ok"] = Value(false);
          reply["error"] = Value(std::string("UnknownManager"));
        } else {
          m->blacklisted = true;
        }
      } else if (cmd == "TERMINATE_MANAGER") {
        ManagerState* m = find_manager(map_str(*f, "manager_id"));
        if (!m) {
          reply["ok"] = Value(false);
          reply["error"] = Value(std::string("UnknownManager"));
        } else {
          m->draining = true;
          m->conn->send(net::msg_of(wire::kShutdown));
        }
      } else if (cmd == "CAPACITY") {
        std::int64_t slots = 0;
        for (auto& [_, m] : managers_)
          if (!m->blacklisted && !m->draining) slots += m->capacity;
        reply["slots"] = Value(slots);
        reply["managers"] = Value(std::int64_t(managers_.size()));
      } else if (cmd == "SHUTDOWN") {
        stop_ = true;
      } else {
        reply["ok"] = Value(false);
        reply["error"] = Value(std::string("UnknownCommand"));
      }
      c->send(reply);
    }
    if (!open || c->closed()) cmd_conns_.erase(it);
  }

  ManagerState* find_manager(const std::string& id) {
    for (auto& [_, m] : managers_)
      if (m->id == id) return m.get();
    return nullptr;
  }

  void notify_manager_event(const std::string& event, const ManagerState& m) {
    if (!client_) return;
    ValueMap msg = net::msg_of(wire::kManagerEvent);
    msg["event"] = Value(event);
    msg["manager_id"] = Value(m.id);
    msg["block_id"] = Value(m.block_id);
    msg["workers"] = Value(std::int64_t(m.workers));
    msg["capacity"] = Value(std::int64_t(m.capacity));
    client_->send(msg);
  }

  void lose_manager(int fd, const std::string& reason) {
    auto it = managers_.find(fd);
    if (it == managers_.end()) return;
    ManagerState& m = *it->second;
    if (client_) {
      if (!m.outstanding.empty()) {
        ValueMap msg = net::msg_of(wire::kManagerLost);
        msg["manager_id"] = Value(m.id);
        msg["reason"] = Value(reason);
        ValueList tasks;
        for (auto [id, attempt] : m.outstanding) {
          ValueMap t;
          t["id"] = Value(id);
          t["attempt"] = Value(attempt);
          tasks.emplace_back(std::move(t));
        }
        msg["tasks"] = Value(std::move(tasks));
        client_->send(msg);
      }
      notify_manager_event("gone", m);
    }
    managers_.erase(it);
  }

  void reap_lost(std::int64_t now) {
    std::vector<int> lost;
    for (auto& [fd, m] : managers_)
      if (now - m->last_rx_us > std::int64_t(cfg_.heartbeat_threshold_ms) * 1000)
        lost.push_back(fd);
    for (int fd : lost) lose_manager(fd, "heartbeat");
  }

  // Matches queued tasks to managers with spare capacity, picking uniformly
  // at random among eligible managers so distribution stays fair.
  void match() {
    while (!queue_.empty()) {
      std::vector<ManagerState*> eligible;
      for (auto& [_, m] : managers_) {
        if (m->blacklisted || m->draining) continue;
        if (int(m->outstanding.size()) < m->capacity) eligible.push_back(m.get());
      }
      if (eligible.empty()) return;
      std::uniform_int_distribution<std::size_t> d(0, eligible.size() - 1);
      ManagerState* m = eligible[d(rng_)];
      int spare = m->capacity - int(m->outstanding.size());
      int batch = std::min<int>({spare, cfg_.batch_size_max, int(queue_.size())});
      ValueList tasks;
      for (int i = 0; i < batch; ++i) {
        PendingTask pt = std::move(queue_.front());
        queue_.pop_front();
        ValueMap t;
        t["id"] = Value(pt.id);
        t["attempt"] = Value(pt.attempt);
        t["payload"] = pt.payload;
        m->outstanding[pt.id] = pt.attempt;
        tasks.emplace_back(std::move(t));
      }
      ValueMap msg = net::msg_of(wire::kTaskBatch);
      msg["tasks"] = Value(std::move(tasks));
      m->conn->send(msg);
    }
  }

  InterchangeConfig cfg_;
  std::mt19937_64 rng_;
  int task_listen_ = -1, cmd_listen_ = -1;
  net::Poller poller_;
  std::unique_ptr<FrameConn> client_;
  bool client_seen_ = false;
  std::map<int, std::unique_ptr<FrameConn>> unclassified_;
  std::map<int, std::unique_ptr<ManagerState>> managers_;
  std::map<int, std::unique_ptr<FrameConn>> cmd_conns_;
  std::deque<PendingTask> queue_;
  bool stop_ = false;
};

}  // namespace

int run_interchange(const InterchangeConfig& cfg) { return Interchange(cfg).run(); }

// ===========================================================================
// Manager

namespace {

struct WorkerSlot {
  std::unique_ptr<FrameConn> conn;
  pid_t pid = -1;
  int index = 0;
  bool busy = false;
  std::int64_t current_id = 0;  // task held while busy
  std::int64_t current_attempt = 0;
};

// Heap-shared with the receive thread, which may outlive the main loop by a
// moment on the exit path.
struct ManagerShared {
  std::mutex mu;
  std::deque<ValueMap> inbound_tasks;
  std::atomic<std::int64_t> last_ix_rx_us{0};
  std::atomic<bool> draining{false};
  std::atomic<bool> ix_gone{false};
};

}  // namespace

int run_manager(const ManagerAgentConfig& cfg) {
  ::signal(SIGPIPE, SIG_IGN);
  std::string manager_id = cfg.manager_id.empty() ? random_id() : cfg.manager_id;
  std::string block_id = cfg.block_id;
  if (block_id.empty()) {
    const char* b = std::getenv("PAREX_BLOCK_ID");
    block_id = b ? b : "unblocked";
  }
  std::string agent = cfg.agent_path.empty() ? self_exe_path() : cfg.agent_path;

  int ix_fd;
  try {
    ix_fd = net::connect_tcp(cfg.interchange_host, cfg.interchange_port, 5000);
  } catch (const net::NetError&) {
    return 2;
  }

  {
    ValueMap reg = net::msg_of(wire::kRegister);
    reg["role"] = Value(std::string("manager"));
    reg["manager_id"] = Value(manager_id);
    reg["block_id"] = Value(block_id);
    reg["capacity"] = Value(std::int64_t(cfg.workers + cfg.prefetch));
    reg["workers"] = Value(std::int64_t(cfg.workers));
    reg["pid"] = Value(std::int64_t(::getpid()));
    net::send_frame_blocking(ix_fd, reg);
  }

  // Spawn the worker pool: one process per worker over an inherited
  // socketpair. Workers die with the manager (PDEATHSIG).
  std::vector<WorkerSlot> workers;
  for (int i = 0; i < cfg.workers; ++i) {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) != 0) return 4;
    SpawnOptions opts;
    opts.kill_on_parent_death = true;
    opts.pass_fd = sv[1];
    opts.env["PAREX_MANAGER_ID"] = manager_id;
    pid_t pid = spawn_process({agent, "worker", "--fd", std::to_string(sv[1]), "--index",
                               std::to_string(i), "--sandbox", cfg.sandbox_root},
                              opts);
    ::close(sv[1]);
    WorkerSlot slot;
    slot.conn = std::make_unique<FrameConn>(sv[0]);
    slot.pid = pid;
    slot.index = i;
    workers.push_back(std::move(slot));
  }

  auto shared = std::make_shared<ManagerShared>();
  shared->last_ix_rx_us = monotonic_us();

  std::thread rx([shared, ix_fd] {
    try {
      for (;;) {
        auto f = net::recv_frame_blocking(ix_fd, -1);
        if (!f) break;  // EOF
        shared->last_ix_rx_us = monotonic_us();
        std::string type = map_str(*f, "type");
        if (type == wire::kTaskBatch) {
          auto it = f->find("tasks");
          if (it != f->end() && it->second.is<ValueList>()) {
            std::lock_guard lk(shared->mu);
            for (const Value& t : it->second.as_list())
              if (t.is<ValueMap>()) shared->inbound_tasks.push_back(t.as_map());
          }
        } else if (type == wire::kShutdown) {
          shared->draining = true;
        }
        // Heartbeats just refresh last_ix_rx_us.
      }
    } catch (const net::NetError&) {
    }
    shared->ix_gone = true;
  });
  rx.detach();

  std::deque<ValueMap> queue;
  ValueList results;
  std::int64_t last_hb_sent = 0;
  int in_flight = 0;
  net::Poller poller;
  int rc = -1;

  while (rc < 0) {
    std::int64_t now = monotonic_us();

    // Losing contact with the interchange means this node is wasted; leave
    // at once so the allocation can be reclaimed.
    if (shared->ix_gone) {
      rc = 2;
      break;
    }
    if (now - shared->last_ix_rx_us.load() >
        std::int64_t(cfg.heartbeat_threshold_ms) * 1000) {
      rc = 3;
      break;
    }

    if (now - last_hb_sent >= std::int64_t(cfg.heartbeat_period_ms) * 1000) {
      last_hb_sent = now;
      ValueMap hb = net::msg_of(wire::kHeartbeat);
      hb["manager_id"] = Value(manager_id);
      try {
        net::send_frame_blocking(ix_fd, hb);
      } catch (const net::NetError&) {
        rc = 2;
        break;
      }
    }

    {
      std::lock_guard lk(shared->mu);
      while (!shared->inbound_tasks.empty()) {
        queue.push_back(std::move(shared->inbound_tasks.front()));
        shared->inbound_tasks.pop_front();
      }
    }

    for (auto& w : workers) {
      if (queue.empty()) break;
      if (w.busy || w.conn->closed()) continue;
      ValueMap task = std::move(queue.front());
      queue.pop_front();
      ValueMap msg = net::msg_of(wire::kTask);
      msg["id"] = task["id"];
      msg["attempt"] = task.count("attempt") ? task["attempt"] : Value(std::int64_t(0));
      msg["payload"] = task.count("payload") ? task["payload"] : Value();
      w.conn->send(msg);
      w.busy = true;
      w.current_id = msg["id"].is<std::int64_t>() ? msg["id"].as_int() : 0;
      w.current_attempt = msg["attempt"].as_int();
      ++in_flight;
    }

    poller.clear();
    for (auto& w : workers)
      if (!w.conn->closed())
        poller.add(w.conn->fd(), POLLIN | (w.conn->wants_send() ? POLLOUT : 0));
    const auto& ready = poller.wait(20);
    for (const auto& p : ready) {
      if (p.revents == 0) continue;
      for (auto& w : workers) {
        if (w.conn->closed() || w.conn->fd() != p.fd) continue;
        if (p.revents & POLLOUT) w.conn->pump_send();
        if (p.revents & (POLLIN | POLLHUP | POLLERR)) {
          bool open = w.conn->pump_recv();
          while (auto f = w.conn->next_frame()) {
            if (map_str(*f, "type") != wire::kResult) continue;
            ValueMap r = *f;
            r.erase("type");
            r["worker"] = Value(std::int64_t(w.index));
            results.emplace_back(std::move(r));
            w.busy = false;
            --in_flight;
          }
          if (!open && w.busy) {
            // Worker died mid-task: report the failure rather than hanging.
            CompletionInfo info;
            info.task_id = std::uint64_t(w.current_id);
            info.attempt = int(w.current_attempt);
            info.worker_index = w.index;
            info.outcome = Outcome::failure(ErrorKind::AppError, "worker process died");
            results.emplace_back(completion_to_map(info));
            w.busy = false;
            --in_flight;
          }
        }
      }
    }

    if (!results.empty()) {
      ValueMap batch = net::msg_of(wire::kResultBatch);
      batch["manager_id"] = Value(manager_id);
      batch["results"] = Value(std::move(results));
      results.clear();
      try {
        net::send_frame_blocking(ix_fd, batch);
      } catch (const net::NetError&) {
        rc = 2;
        break;
      }
    }

    if (shared->draining && in_flight == 0 && queue.empty()) {
      bool inbound_empty;
      {
        std::lock_guard lk(shared->mu);
        inbound_empty = shared->inbound_tasks.empty();
      }
      if (inbound_empty) rc = 0;
    }
  }

  for (auto& w : workers) terminate_process(w.pid, 0);
  std::fflush(nullptr);
  ::_exit(rc);  // leave nothing behind; the receive thread dies with us
}

// ===========================================================================
// Worker

int run_worker(int fd, int index, const std::string& sandbox_root) {
  ::signal(SIGPIPE, SIG_IGN);
  ExecutionKernel kernel(AppRegistry::global(), sandbox_root);
  for (;;) {
    std::optional<ValueMap> f;
    try {
      f = net::recv_frame_blocking(fd, -1);
    } catch (const net::NetError&) {
      return 1;
    }
    if (!f) return 0;  // manager closed the pair
    if (map_str(*f, "type") != wire::kTask) continue;

    TaskEnvelope env;
    auto pl = f->find("payload");
    if (pl != f->end() && pl->second.is<Bytes>()) {
      try {
        Value v = decode(pl->second.as<Bytes>().data);
        env = envelope_from_map(v.as_map());
      } catch (const std::exception& e) {
        env.task_id = std::uint64_t(map_int(*f, "id"));
        env.attempt = int(map_int(*f, "attempt"));
        CompletionInfo bad;
        bad.task_id = env.task_id;
        bad.attempt = env.attempt;
        bad.outcome = Outcome::failure(ErrorKind::Internal,
                                       std::string("undecodable task payload: ") + e.what());
        ValueMap r = completion_to_map(bad);
        r["type"] = Value(std::string(wire::kResult));
        net::send_frame_blocking(fd, r);
        continue;
      }
    }

    CompletionInfo info;
    info.task_id = env.task_id;
    info.attempt = env.attempt;
    info.worker_index = index;
    info.exec_start_us = monotonic_us();
    TaskContext ctx{env.task_id, env.attempt, "", ""};
    info.outcome = kernel.execute(env.app, env.args, env.kwargs, ctx);
    info.exec_end_us = monotonic_us();

    ValueMap r = completion_to_map(info);
    r["type"] = Value(std::string(wire::kResult));
    try {
      net::send_frame_blocking(fd, r);
    } catch (const net::NetError&) {
      return 1;
    }
  }
}

}  // namespace parex
