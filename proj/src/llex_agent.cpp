// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/llex_agent.hpp"

#include <signal.h>

#include <cstdio>
#include <deque>
#include <map>
#include <memory>

#include "parex/clock.hpp"
#include "parex/exec_kernel.hpp"
#include "parex/net.hpp"
#include "parex/wire.hpp"

namespace parex {

using net::FrameConn;

namespace {

struct WorkerConn {
  std::unique_ptr<FrameConn> conn;
  bool busy = false;
};

class Relay {
 public:
  explicit Relay(const RelayConfig& cfg) : cfg_(cfg) {}

  int run() {
    ::signal(SIGPIPE, SIG_IGN);
    std::uint16_t cport = 0, wport = 0;
    client_listen_ = net::listen_tcp(cfg_.client_port, &cport);
    worker_listen_ = net::listen_tcp(cfg_.worker_port, &wport);
    std::printf("PAREX_LLEX client=%u worker=%u\n", cport, wport);
    std::fflush(stdout);

    while (!stop_) poll_once();
    return 0;
  }

 private:
  void poll_once() {
    poller_.clear();
    poller_.add(client_listen_, POLLIN);
    poller_.add(worker_listen_, POLLIN);
    for (auto& [fd, c] : clients_) poller_.add(fd, POLLIN | (c->wants_send() ? POLLOUT : 0));
    for (auto& [fd, w] : workers_)
      poller_.add(fd, POLLIN | (w.conn->wants_send() ? POLLOUT : 0));

    const auto& ready = poller_.wait(100);
    for (const auto& p : ready) {
      if (p.revents == 0) continue;
      if (p.fd == client_listen_) {
        int fd;
        while ((fd = net::accept_conn(client_listen_)) >= 0)
          clients_.emplace(fd, std::make_unique<FrameConn>(fd));
      } else if (p.fd == worker_listen_) {
        int fd;
        while ((fd = net::accept_conn(worker_listen_)) >= 0)
          workers_.emplace(fd, WorkerConn{std::make_unique<FrameConn>(fd), false});
      } else if (auto it = clients_.find(p.fd); it != clients_.end()) {
        if (p.revents & POLLOUT) it->second->pump_send();
        if (p.revents & (POLLIN | POLLHUP | POLLERR)) pump_client(p.fd);
      } else if (auto wit = workers_.find(p.fd); wit != workers_.end()) {
        if (p.revents & POLLOUT) wit->second.conn->pump_send();
        if (p.revents & (POLLIN | POLLHUP | POLLERR)) pump_worker(p.fd);
      }
    }
  }

  void pump_client(int fd) {
    auto it = clients_.find(fd);
    bool open = it->second->pump_recv();
    while (auto f = it->second->next_frame()) {
      std::string type = map_str(*f, "type");
      if (type == wire::kTask) {
        ValueMap task = *f;
        task["client"] = Value(std::int64_t(fd));
        route_task(std::move(task));
      } else if (type == wire::kCmd && map_str(*f, "cmd") == "INTROSPECT") {
        // The honest answer to "what do you remember?": buffered frames and
        // connection bits. There is no task table to report.
        ValueMap reply = net::msg_of(wire::kCmdReply);
        reply["ok"] = Value(true);
        std::int64_t busy = 0;
        for (auto& [_, w] : workers_)
          if (w.busy) ++busy;
        reply["buffered_tasks"] = Value(std::int64_t(buffer_.size()));
        reply["busy_workers"] = Value(busy);
        reply["idle_workers"] = Value(std::int64_t(workers_.size()) - busy);
        reply["task_records"] = Value(std::int64_t(0));
        it->second->send(reply);
      }
    }
    if (!open || it->second->closed()) clients_.erase(it);
  }

  void pump_worker(int fd) {
    auto it = workers_.find(fd);
    bool open = it->second.conn->pump_recv();
    while (auto f = it->second.conn->next_frame()) {
      std::string type = map_str(*f, "type");
      if (type == wire::kRegister) continue;  // presence is the registration
      if (type != wire::kResult) continue;
      it->second.busy = false;
      ValueMap result = *f;
      int client_fd = int(map_int(result, "client", -1));
      result.erase("client");
      result["hops"] = Value(map_int(result, "hops") + 1);
      auto cit = clients_.find(client_fd);
      if (cit != clients_.end()) cit->second->send(result);
      // An unknown client means it disconnected; the result evaporates.
      drain_buffer();
    }
    if (!open || it->second.conn->closed()) {
      // Worker gone. Any frame it held is simply lost: no tracking here.
      workers_.erase(it);
    }
  }

  void route_task(ValueMap task) {
    for (auto& [fd, w] : workers_) {
      if (w.busy || w.conn->closed()) continue;
      task["hops"] = Value(map_int(task, "hops") + 1);
      w.conn->send(task);
      w.busy = true;
      return;
    }
    buffer_.push_back(std::move(task));  // until a worker frees
  }

  void drain_buffer() {
    while (!buffer_.empty()) {
      bool any_idle = false;
      for (auto& [fd, w] : workers_)
        if (!w.busy && !w.conn->closed()) any_idle = true;
      if (!any_idle) return;
      ValueMap task = std::move(buffer_.front());
      buffer_.pop_front();
      route_task(std::move(task));
    }
  }

  RelayConfig cfg_;
  int client_listen_ = -1, worker_listen_ = -1;
  net::Poller poller_;
  std::map<int, std::unique_ptr<FrameConn>> clients_;
  std::map<int, WorkerConn> workers_;
  std::deque<ValueMap> buffer_;
  bool stop_ = false;
};

}  // namespace

int run_llex_relay(const RelayConfig& cfg) { return Relay(cfg).run(); }

int run_llex_worker(const LlexWorkerConfig& cfg) {
  ::signal(SIGPIPE, SIG_IGN);
  int fd;
  try {
    fd = net::connect_tcp(cfg.relay_host, cfg.relay_port, 5000);
  } catch (const net::NetError&) {
    return 2;
  }
  {
    ValueMap reg = net::msg_of(wire::kRegister);
    reg["role"] = Value(std::string("worker"));
    reg["index"] = Value(std::int64_t(cfg.index));
    net::send_frame_blocking(fd, reg);
  }

  ExecutionKernel kernel(AppRegistry::global(), cfg.sandbox_root);
  for (;;) {
    std::optional<ValueMap> f;
    try {
      f = net::recv_frame_blocking(fd, -1);
    } catch (const net::NetError&) {
      return 1;
    }
    if (!f) return 0;
    if (map_str(*f, "type") != wire::kTask) continue;
    if (cfg.drop_frames) continue;  // fault injection: silent loss

    TaskEnvelope env;
    auto pl = f->find("payload");
    if (pl != f->end() && pl->second.is<Bytes>()) {
      try {
        env = envelope_from_map(decode(pl->second.as<Bytes>().data).as_map());
      } catch (const std::exception&) {
        continue;
      }
    }

    CompletionInfo info;
    info.task_id = env.task_id;
    info.attempt = env.attempt;
    info.worker_index = cfg.index;
    info.exec_start_us = monotonic_us();
    TaskContext ctx{env.task_id, env.attempt, "", ""};
    info.outcome = kernel.execute(env.app, env.args, env.kwargs, ctx);
    info.exec_end_us = monotonic_us();

    ValueMap r = completion_to_map(info);
    r["type"] = Value(std::string(wire::kResult));
    r["client"] = (*f)["client"];
    if (auto rep = f->find("replica"); rep != f->end()) r["replica"] = rep->second;
    if (auto rt = f->find("retry"); rt != f->end()) r["retry"] = rt->second;
    r["hops"] = Value(std::int64_t(1));
    try {
      net::send_frame_blocking(fd, r);
    } catch (const net::NetError&) {
      return 1;
    }
  }
}

}  // namespace parex
