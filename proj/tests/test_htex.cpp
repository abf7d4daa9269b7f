// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <signal.h>

#include <condition_variable>
#include <memory>
#include <mutex>
#include <set>

#include "parex/builtin_apps.hpp"
#include "parex/clock.hpp"
#include "parex/htex_executor.hpp"
#include "parex/kernel.hpp"
#include "parex/stats.hpp"
#include "test_util.hpp"

using namespace parex;

namespace {

struct Collector {
  std::mutex mu;
  std::condition_variable cv;
  std::vector<CompletionInfo> done;

  CompletionHandler handler() {
    return [this](CompletionInfo info) {
      std::lock_guard lk(mu);
      done.push_back(std::move(info));
      cv.notify_all();
    };
  }
  bool wait_for(std::size_t n, int timeout_ms = 30000) {
    std::unique_lock lk(mu);
    return cv.wait_for(lk, std::chrono::milliseconds(timeout_ms),
                       [&] { return done.size() >= n; });
  }
};

HtexConfig fast_config(const std::string& label, int workers, int blocks,
                       const std::string& sandbox) {
  HtexConfig cfg;
  cfg.label = label;
  cfg.workers_per_node = workers;
  cfg.init_blocks = blocks;
  cfg.heartbeat_period_ms = 300;
  cfg.heartbeat_threshold_ms = 900;
  cfg.sandbox_root = sandbox;
  cfg.agent_path = test::agent_path();
  return cfg;
}

TaskEnvelope envelope(std::uint64_t id, const std::string& app, ValueList args = {}) {
  TaskEnvelope env;
  env.task_id = id;
  env.app = AppRegistry::global().native(app);
  env.args = std::move(args);
  return env;
}

}  // namespace

TEST_CASE("hello end to end through interchange, manager, and worker") {
  register_builtin_apps();
  test::TempDir dir("htex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(fast_config("htex", 2, 1, dir.str()), provider);

  Engine eng;
  eng.add_executor(ex);
  eng.start();
  REQUIRE(ex->wait_for_capacity(2, 15000));

  FutureHandle f = eng.submit(AppRegistry::global().native("hello"), {Value("World")});
  const Outcome& o = f.result();
  REQUIRE(o.ok);
  CHECK(o.value.as_string() == "Hello World");
  eng.shutdown();
}

TEST_CASE("shell task runs in a worker sandbox and reports unix status") {
  test::TempDir dir("htex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(fast_config("htex", 1, 1, dir.str()), provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_capacity(1, 15000));

  TaskEnvelope env;
  env.task_id = 1;
  env.app = shell_app("touch", "echo hi > marker.txt && exit 0");
  ex->submit_task(env);
  TaskEnvelope bad;
  bad.task_id = 2;
  bad.app = shell_app("fail", "exit 7");
  ex->submit_task(bad);
  REQUIRE(c.wait_for(2));
  ex->shutdown();

  for (const auto& info : c.done) {
    if (info.task_id == 1) {
      REQUIRE(info.outcome.ok);
      CHECK(info.outcome.value.as<UnixStatus>().code == 0);
    } else {
      REQUIRE_FALSE(info.outcome.ok);
      CHECK(info.outcome.error.detail.at("unix_status") == "7");
    }
  }
}

TEST_CASE("capacity matching: 2 managers of capacity 1 split 3 tasks") {
  test::TempDir dir("htex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(fast_config("htex", 1, 2, dir.str()), provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_capacity(2, 15000));

  for (int i = 1; i <= 3; ++i)
    ex->submit_task(envelope(std::uint64_t(i), "sleep_ms", {Value(300)}));
  REQUIRE(c.wait_for(3, 20000));
  ex->shutdown();

  // First two run in parallel on distinct managers; the third waits for a
  // free slot, so total completions per manager are {2,1}.
  std::map<std::string, int> per_manager;
  for (const auto& info : c.done) {
    REQUIRE(info.outcome.ok);
    ++per_manager[info.manager_id];
  }
  REQUIRE(per_manager.size() == 2);
  std::vector<int> counts;
  for (auto& [_, n] : per_manager) counts.push_back(n);
  std::sort(counts.begin(), counts.end());
  CHECK(counts == std::vector<int>{1, 2});
}

TEST_CASE("capacity bound: outstanding per manager never exceeds workers+prefetch") {
  test::TempDir dir("htex");
  HtexConfig cfg = fast_config("htex", 4, 1, dir.str());
  cfg.prefetch_capacity = 4;
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(cfg, provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_capacity(8, 15000));

  for (int i = 1; i <= 8; ++i)
    ex->submit_task(envelope(std::uint64_t(i), "sleep_ms", {Value(200)}));
  // While tasks run, the interchange must respect the advertised bound.
  sleep_ms(60);
  auto outstanding = ex->outstanding_per_manager();
  REQUIRE(outstanding.size() == 1);
  CHECK(outstanding.begin()->second <= 8);
  REQUIRE(c.wait_for(8, 20000));
  ex->shutdown();
  std::set<std::uint64_t> ids;
  for (const auto& info : c.done) ids.insert(info.task_id);
  CHECK(ids.size() == 8);  // every task exactly once
}

TEST_CASE("single-task matchings spread uniformly over idle managers") {
  test::TempDir dir("htex");
  HtexConfig cfg = fast_config("htex", 1, 4, dir.str());
  cfg.seed = 99;
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(cfg, provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_capacity(4, 15000));

  const int n = 2000;
  std::map<std::string, std::size_t> per_manager;
  for (int i = 1; i <= n; ++i) {
    ex->submit_task(envelope(std::uint64_t(i), "noop"));
    REQUIRE(c.wait_for(std::size_t(i)));
  }
  ex->shutdown();
  for (const auto& info : c.done) ++per_manager[info.manager_id];
  REQUIRE(per_manager.size() == 4);
  std::vector<std::size_t> counts;
  for (auto& [_, cnt] : per_manager) counts.push_back(cnt);
  CHECK(uniformity_pvalue(counts) > 0.01);
}

TEST_CASE("results flow in batches: all ids exactly once across 100 no-ops") {
  test::TempDir dir("htex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(fast_config("htex", 4, 1, dir.str()), provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_capacity(4, 15000));
  for (int i = 1; i <= 100; ++i) ex->submit_task(envelope(std::uint64_t(i), "noop"));
  REQUIRE(c.wait_for(100, 30000));
  sleep_ms(100);  // any duplicate would arrive by now
  ex->shutdown();
  REQUIRE(c.done.size() == 100);
  std::set<std::uint64_t> ids;
  for (const auto& info : c.done) ids.insert(info.task_id);
  CHECK(ids.size() == 100);
}

TEST_CASE("command channel: OUTSTANDING idle is all zero, BLACKLIST diverts work") {
  test::TempDir dir("htex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(fast_config("htex", 1, 2, dir.str()), provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_capacity(2, 15000));

  auto idle = ex->outstanding_per_manager();
  REQUIRE(idle.size() == 2);
  for (auto& [_, n] : idle) CHECK(n == 0);

  std::string victim = idle.begin()->first;
  CHECK(ex->blacklist_manager(victim));
  CHECK_FALSE(ex->blacklist_manager("no-such-manager"));

  for (int i = 1; i <= 50; ++i) ex->submit_task(envelope(std::uint64_t(i), "noop"));
  REQUIRE(c.wait_for(50, 20000));
  ex->shutdown();
  for (const auto& info : c.done) CHECK(info.manager_id != victim);
}

TEST_CASE("manager SIGKILL surfaces ManagerLost for outstanding tasks") {
  test::TempDir dir("htex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(fast_config("htex", 2, 1, dir.str()), provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_capacity(2, 15000));

  for (int i = 1; i <= 2; ++i)
    ex->submit_task(envelope(std::uint64_t(i), "sleep_ms", {Value(20000)}));
  sleep_ms(300);  // let them land on workers

  auto handles = provider->handles();
  REQUIRE(handles.size() == 1);
  auto pids = provider->block_pids(handles[0]);
  REQUIRE_FALSE(pids.empty());
  ::kill(pids[0], SIGKILL);  // the manager (workers die with it)

  REQUIRE(c.wait_for(2, 15000));
  ex->shutdown();
  for (const auto& info : c.done) {
    REQUIRE_FALSE(info.outcome.ok);
    CHECK(info.outcome.error.kind == ErrorKind::ManagerLost);
  }
}

TEST_CASE("heartbeat silence (SIGSTOP) is detected at the threshold") {
  test::TempDir dir("htex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(fast_config("htex", 1, 1, dir.str()), provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_capacity(1, 15000));

  ex->submit_task(envelope(1, "sleep_ms", {Value(20000)}));
  sleep_ms(200);
  auto pids = provider->block_pids(provider->handles()[0]);
  REQUIRE_FALSE(pids.empty());
  std::int64_t t0 = monotonic_us();
  for (pid_t p : pids) ::kill(p, SIGSTOP);  // silent but connected

  REQUIRE(c.wait_for(1, 10000));
  double detect_ms = double(monotonic_us() - t0) / 1000.0;
  for (pid_t p : pids) ::kill(p, SIGKILL);
  ex->shutdown();
  CHECK(c.done[0].outcome.error.kind == ErrorKind::ManagerLost);
  // Not before the threshold, not much after it.
  CHECK(detect_ms >= 900 * 0.8);
  CHECK(detect_ms <= 900 + 2000);
}

TEST_CASE("lost manager with zero outstanding shrinks capacity without task errors") {
  test::TempDir dir("htex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(fast_config("htex", 1, 2, dir.str()), provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_capacity(2, 15000));

  auto handles = provider->handles();
  auto pids = provider->block_pids(handles[0]);
  REQUIRE_FALSE(pids.empty());
  ::kill(pids[0], SIGKILL);

  std::int64_t deadline = monotonic_us() + 10'000'000;
  while (monotonic_us() < deadline && ex->connected_slots() != 1) sleep_ms(50);
  CHECK(ex->connected_slots() == 1);
  CHECK(c.done.empty());  // no task errors: nothing was outstanding
  ex->shutdown();
}

TEST_CASE("engine retries reroute tasks from a killed manager to the survivor") {
  test::TempDir dir("htex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(fast_config("htex", 2, 2, dir.str()), provider);
  EngineConfig cfg;
  cfg.max_retries = 1;
  Engine eng(std::move(cfg));
  eng.add_executor(ex);
  eng.start();
  REQUIRE(ex->wait_for_capacity(4, 15000));

  std::vector<FutureHandle> futs;
  for (int i = 0; i < 4; ++i)
    futs.push_back(eng.submit(AppRegistry::global().native("sleep_ms"), {Value(1500)}));
  sleep_ms(400);

  auto handles = provider->handles();
  REQUIRE(handles.size() == 2);
  auto pids = provider->block_pids(handles[0]);
  REQUIRE_FALSE(pids.empty());
  ::kill(pids[0], SIGKILL);

  for (auto& f : futs) {
    const Outcome& o = f.result();
    REQUIRE(o.ok);
    CHECK(o.value.as_int() == 1500);
  }
  eng.shutdown();
}

TEST_CASE("killing the interchange makes managers exit within the threshold") {
  test::TempDir dir("htex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(fast_config("htex", 1, 2, dir.str()), provider);
  ex->set_completion_handler([](CompletionInfo) {});
  ex->start();
  REQUIRE(ex->wait_for_capacity(2, 15000));

  std::int64_t t0 = monotonic_us();
  ::kill(ex->interchange_pid(), SIGKILL);

  // heartbeat_threshold + heartbeat_period = 1200 ms budget.
  std::int64_t deadline = t0 + (900 + 300) * 1000;
  bool all_exited = false;
  while (monotonic_us() < deadline) {
    all_exited = true;
    for (const auto& h : provider->handles())
      if (!provider->block_pids(h).empty()) all_exited = false;
    if (all_exited) break;
    sleep_ms(20);
  }
  CHECK(all_exited);
  ex->shutdown();
}

TEST_CASE("scale_out then scale_in through the provider") {
  test::TempDir dir("htex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<HtexExecutor>(fast_config("htex", 1, 1, dir.str()), provider);
  ex->set_completion_handler([](CompletionInfo) {});
  ex->start();
  REQUIRE(ex->wait_for_capacity(1, 15000));

  CHECK(ex->scale_out(2) == 2);
  REQUIRE(ex->wait_for_capacity(3, 15000));
  LoadSnapshot snap = ex->load_snapshot();
  CHECK(snap.active_blocks == 3);
  CHECK(snap.active_slots == 3);

  // Scale one block back in; capacity shrinks, no errors.
  std::vector<std::string> victims{provider->handles().front()};
  CHECK(ex->scale_in(victims) == 1);
  std::int64_t deadline = monotonic_us() + 10'000'000;
  while (monotonic_us() < deadline && ex->connected_slots() != 2) sleep_ms(50);
  CHECK(ex->connected_slots() == 2);
  ex->shutdown();
}
