// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <memory>
#include <thread>

#include "parex/builtin_apps.hpp"
#include "parex/kernel.hpp"
#include "parex/local_executor.hpp"
#include "parex/monitor.hpp"
#include "test_util.hpp"

using namespace parex;

TEST_CASE("empty run leaves a header-only log") {
  test::TempDir dir("mon");
  std::string path = dir.file("m.log");
  { FileSink sink(path, "r1", 99, 123456); }
  MonitorLog log = read_monitor_log(path);
  CHECK(log.header.version == 1);
  CHECK(log.header.run_id == "r1");
  CHECK(log.header.seed == 99);
  CHECK(log.header.epoch_wall_us == 123456);
  CHECK(log.events.empty());
}

TEST_CASE("detail round-trips through escaping") {
  test::TempDir dir("mon");
  std::string path = dir.file("m.log");
  {
    FileSink sink(path, "r", 1, 0);
    MonitorEvent e;
    e.timestamp_us = 5;
    e.task_id = 7;
    e.kind = MonitorEvent::Kind::StateChange;
    e.detail = {{"to", "Pending"}, {"weird", "a,b=c\td\ne"}};
    sink.append(e);
  }
  MonitorLog log = read_monitor_log(path);
  REQUIRE(log.events.size() == 1);
  CHECK(log.events[0].detail.at("weird") == "a,b=c\td\ne");
}

TEST_CASE("a three-task run replays into three complete legal histories") {
  test::TempDir dir("mon");
  std::string path = dir.file("run.log");
  {
    register_builtin_apps();
    EngineConfig cfg;
    cfg.monitor = std::make_shared<FileSink>(path, "run3", 1, 0);
    Engine eng(std::move(cfg));
    eng.add_executor(std::make_shared<LocalExecutor>("local", 2, dir.file("sbx")));
    eng.start();
    auto& reg = AppRegistry::global();
    FutureHandle a = eng.submit(reg.native("add"), {Value(1), Value(2)});
    FutureHandle b = eng.submit(reg.native("mul"), {a.ref(), Value(2)});
    eng.submit(reg.native("fail_always"), {Value("x")});
    eng.wait_all();
    eng.shutdown();
  }
  MonitorLog log = read_monitor_log(path);
  auto histories = replay_task_histories(log);
  CHECK(histories.size() == 3);
  for (const auto& [id, hist] : histories) {
    REQUIRE_FALSE(hist.empty());
    CHECK(task_state_terminal(hist.back()));
  }
}

TEST_CASE("concurrent appends never tear lines") {
  test::TempDir dir("mon");
  std::string path = dir.file("con.log");
  {
    FileSink sink(path, "con", 1, 0);
    std::vector<std::thread> writers;
    for (int w = 0; w < 8; ++w) {
      writers.emplace_back([&sink, w] {
        for (int i = 0; i < 500; ++i) {
          MonitorEvent e;
          e.timestamp_us = i;
          e.task_id = std::uint64_t(w * 1000 + i);
          e.kind = MonitorEvent::Kind::StateChange;
          e.detail = {{"to", "Pending"}, {"w", std::to_string(w)}};
          sink.append(e);
        }
      });
    }
    for (auto& t : writers) t.join();
    sink.flush();
  }
  MonitorLog log = read_monitor_log(path);  // parse audit: throws on torn lines
  CHECK(log.events.size() == 8 * 500);
}

TEST_CASE("utilization: one worker busy its whole lifetime is 100%") {
  MonitorLog log;
  auto ev = [&](std::int64_t ts, MonitorEvent::Kind k,
                std::map<std::string, std::string> d, std::uint64_t id = 0) {
    MonitorEvent e;
    e.timestamp_us = ts;
    e.task_id = id;
    e.kind = k;
    e.detail = std::move(d);
    log.events.push_back(e);
  };
  ev(0, MonitorEvent::Kind::ManagerEvent,
     {{"event", "register"}, {"manager_id", "m1"}, {"workers", "1"}});
  ev(0, MonitorEvent::Kind::StateChange, {{"from", "Launchable"}, {"to", "Launched"}}, 1);
  ev(1000, MonitorEvent::Kind::StateChange,
     {{"from", "Running"},
      {"to", "Succeeded"},
      {"exec_start_us", "0"},
      {"exec_end_us", "1000"}},
     1);
  UtilizationReport rep = compute_utilization(log);
  CHECK(rep.utilization == doctest::Approx(1.0));
  CHECK(rep.makespan_us == 1000);
}

TEST_CASE("utilization: one of two workers idle gives 50%") {
  MonitorLog log;
  auto ev = [&](std::int64_t ts, MonitorEvent::Kind k,
                std::map<std::string, std::string> d, std::uint64_t id = 0) {
    MonitorEvent e;
    e.timestamp_us = ts;
    e.task_id = id;
    e.kind = k;
    e.detail = std::move(d);
    log.events.push_back(e);
  };
  ev(0, MonitorEvent::Kind::ManagerEvent,
     {{"event", "register"}, {"manager_id", "m1"}, {"workers", "2"}});
  ev(0, MonitorEvent::Kind::StateChange, {{"to", "Launched"}}, 1);
  ev(2000, MonitorEvent::Kind::StateChange,
     {{"to", "Succeeded"}, {"exec_start_us", "0"}, {"exec_end_us", "2000"}}, 1);
  UtilizationReport rep = compute_utilization(log);
  CHECK(rep.utilization == doctest::Approx(0.5));
}

TEST_CASE("incomplete log (no completions) raises") {
  MonitorLog log;
  MonitorEvent e;
  e.kind = MonitorEvent::Kind::StateChange;
  e.detail = {{"to", "Launched"}};
  log.events.push_back(e);
  CHECK_THROWS_AS(compute_utilization(log), IncompleteLog);
}

TEST_CASE("replay flags a task with no terminal event") {
  MonitorLog log;
  MonitorEvent e;
  e.task_id = 1;
  e.kind = MonitorEvent::Kind::StateChange;
  e.detail = {{"to", "Pending"}};
  log.events.push_back(e);
  CHECK_THROWS_AS(replay_task_histories(log), IncompleteLog);
}

TEST_CASE("replay rejects an illegal transition") {
  MonitorLog log;
  auto ev = [&](const char* to) {
    MonitorEvent e;
    e.task_id = 1;
    e.kind = MonitorEvent::Kind::StateChange;
    e.detail = {{"to", to}};
    log.events.push_back(e);
  };
  ev("Pending");
  ev("Running");  // skips Launchable/Launched
  CHECK_THROWS(replay_task_histories(log));
}
