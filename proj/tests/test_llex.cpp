// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <condition_variable>
#include <memory>
#include <mutex>
#include <set>

#include "parex/builtin_apps.hpp"
#include "parex/clock.hpp"
#include "parex/kernel.hpp"
#include "parex/llex_executor.hpp"
#include "parex/proc.hpp"
#include "parex/wire.hpp"
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

LlexConfig base_config(const std::string& sandbox, int workers) {
  LlexConfig cfg;
  cfg.workers = workers;
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

pid_t spawn_drop_worker(const LlexExecutor& ex, const std::string& sandbox) {
  SpawnOptions opts;
  opts.kill_on_parent_death = true;
  return spawn_process({test::agent_path(), "llex-worker", "--relay",
                        "127.0.0.1:" + std::to_string(ex.worker_port()), "--sandbox",
                        sandbox, "--index", "99", "--drop"},
                       opts);
}

}  // namespace

TEST_CASE("single no-op round-trips and the relay retains nothing") {
  register_builtin_apps();
  test::TempDir dir("llex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<LlexExecutor>(base_config(dir.str(), 1), provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_workers(1, 15000));

  ex->submit_task(envelope(1, "noop"));
  REQUIRE(c.wait_for(1));
  CHECK(c.done[0].outcome.ok);

  ValueMap intro = ex->introspect();
  CHECK(map_int(intro, "buffered_tasks") == 0);
  CHECK(map_int(intro, "busy_workers") == 0);
  CHECK(map_int(intro, "task_records") == 0);
  ex->shutdown();
}

TEST_CASE("100 tasks over 4 workers: correct results, two hops each way") {
  test::TempDir dir("llex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<LlexExecutor>(base_config(dir.str(), 4), provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_workers(4, 15000));

  for (int i = 1; i <= 100; ++i)
    ex->submit_task(envelope(std::uint64_t(i), "add", {Value(i), Value(i)}));
  REQUIRE(c.wait_for(100));
  ex->shutdown();

  std::set<std::uint64_t> ids;
  for (const auto& info : c.done) {
    REQUIRE(info.outcome.ok);
    CHECK(info.outcome.value.as_int() == 2 * std::int64_t(info.task_id));
    ids.insert(info.task_id);
  }
  CHECK(ids.size() == 100);
  // client -> relay -> worker and back: one relay hop each way.
  CHECK(ex->last_result_hops() == 2);
}

TEST_CASE("tasks buffer while no worker is available, then drain") {
  test::TempDir dir("llex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<LlexExecutor>(base_config(dir.str(), 0), provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();

  for (int i = 1; i <= 5; ++i) ex->submit_task(envelope(std::uint64_t(i), "noop"));
  sleep_ms(100);
  ValueMap intro = ex->introspect();
  CHECK(map_int(intro, "buffered_tasks") == 5);

  // A worker shows up late; everything buffered flows through it.
  SpawnOptions opts;
  opts.kill_on_parent_death = true;
  pid_t w = spawn_process({test::agent_path(), "llex-worker", "--relay",
                           "127.0.0.1:" + std::to_string(ex->worker_port()), "--sandbox",
                           dir.str(), "--index", "0"},
                          opts);
  REQUIRE(c.wait_for(5));
  ValueMap after = ex->introspect();
  CHECK(map_int(after, "buffered_tasks") == 0);
  ex->shutdown();
  terminate_process(w);
}

TEST_CASE("replication 2 with both workers healthy surfaces exactly one result") {
  test::TempDir dir("llex");
  LlexConfig cfg = base_config(dir.str(), 2);
  cfg.replication_factor = 2;
  cfg.task_timeout_ms = 5000;
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<LlexExecutor>(cfg, provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  REQUIRE(ex->wait_for_workers(2, 15000));

  for (int i = 1; i <= 50; ++i) ex->submit_task(envelope(std::uint64_t(i), "noop"));
  REQUIRE(c.wait_for(50));
  sleep_ms(300);  // give duplicates time to arrive
  ex->shutdown();
  CHECK(c.done.size() == 50);  // exactly one surfaced outcome per task
  CHECK(ex->duplicates_discarded() > 0);
}

TEST_CASE("a frame-dropping worker cannot stop replication from succeeding") {
  test::TempDir dir("llex");
  LlexConfig cfg = base_config(dir.str(), 1);
  cfg.replication_factor = 2;
  cfg.task_timeout_ms = 10000;  // generous: success must come from replication,
  cfg.max_timed_retries = 0;    // not timed retries
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<LlexExecutor>(cfg, provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();
  pid_t dropper = spawn_drop_worker(*ex, dir.str());
  REQUIRE(ex->wait_for_workers(2, 15000));

  std::int64_t t0 = monotonic_us();
  for (int i = 1; i <= 100; ++i) ex->submit_task(envelope(std::uint64_t(i), "noop"));
  REQUIRE(c.wait_for(100));
  double elapsed_ms = double(monotonic_us() - t0) / 1000.0;
  ex->shutdown();
  terminate_process(dropper);

  std::set<std::uint64_t> ids;
  for (const auto& info : c.done) {
    REQUIRE(info.outcome.ok);
    ids.insert(info.task_id);
  }
  CHECK(ids.size() == 100);
  // No timed-retry wave was needed: far faster than the timeout.
  CHECK(elapsed_ms < cfg.task_timeout_ms);
}

TEST_CASE("worker death mid-task is invisible to the relay; timed retry recovers") {
  test::TempDir dir("llex");
  LlexConfig cfg = base_config(dir.str(), 0);  // no pool: we manage workers by hand
  cfg.task_timeout_ms = 400;
  cfg.max_timed_retries = 3;
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<LlexExecutor>(cfg, provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();

  pid_t dropper = spawn_drop_worker(*ex, dir.str());
  REQUIRE(ex->wait_for_workers(1, 15000));

  // The only worker swallows the first copy. The relay reports nothing.
  ex->submit_task(envelope(1, "echo", {Value(314)}));
  sleep_ms(150);
  CHECK(c.done.empty());

  // A healthy worker joins; the timed retry lands on it.
  SpawnOptions opts;
  opts.kill_on_parent_death = true;
  pid_t healthy = spawn_process({test::agent_path(), "llex-worker", "--relay",
                                 "127.0.0.1:" + std::to_string(ex->worker_port()),
                                 "--sandbox", dir.str(), "--index", "1"},
                                opts);
  REQUIRE(c.wait_for(1, 10000));
  CHECK(c.done[0].outcome.ok);
  CHECK(c.done[0].outcome.value.as_int() == 314);
  ex->shutdown();
  terminate_process(dropper);
  terminate_process(healthy);
}

TEST_CASE("all workers dead: timeout after the full retry schedule") {
  test::TempDir dir("llex");
  LlexConfig cfg = base_config(dir.str(), 0);
  cfg.task_timeout_ms = 100;
  cfg.max_timed_retries = 2;
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<LlexExecutor>(cfg, provider);
  Collector c;
  ex->set_completion_handler(c.handler());
  ex->start();

  std::int64_t t0 = monotonic_us();
  ex->submit_task(envelope(1, "noop"));
  REQUIRE(c.wait_for(1, 5000));
  double elapsed_ms = double(monotonic_us() - t0) / 1000.0;
  ex->shutdown();

  REQUIRE_FALSE(c.done[0].outcome.ok);
  CHECK(c.done[0].outcome.error.kind == ErrorKind::Timeout);
  // Three waves of 100 ms (initial + 2 retries), with scheduling slack.
  CHECK(elapsed_ms >= 300 - 10);
  CHECK(elapsed_ms <= 300 + 150);
}

TEST_CASE("llex serves a full engine DAG") {
  test::TempDir dir("llex");
  auto provider = std::make_shared<LocalProvider>();
  auto ex = std::make_shared<LlexExecutor>(base_config(dir.str(), 2), provider);
  Engine eng;
  eng.add_executor(ex);
  eng.start();
  REQUIRE(ex->wait_for_workers(2, 15000));
  auto& reg = AppRegistry::global();
  FutureHandle a = eng.submit(reg.native("add"), {Value(1), Value(2)});
  FutureHandle b = eng.submit(reg.native("mul"), {a.ref(), Value(10)});
  CHECK(b.result().value.as_int() == 30);
  eng.shutdown();
}
