// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <atomic>

#include "parex/clock.hpp"
#include "parex/elasticity.hpp"
#include "test_util.hpp"

using namespace parex;

namespace {

LoadSnapshot snap(std::size_t outstanding, std::size_t active, std::size_t pending = 0) {
  LoadSnapshot s;
  s.outstanding_tasks = outstanding;
  s.active_blocks = active;
  s.pending_blocks = pending;
  for (std::size_t i = 0; i < active; ++i)
    s.idle_block_ages.emplace_back("b" + std::to_string(i), 0);
  return s;
}

StrategyConfig cfg(double parallelism, int min_b, int max_b, int idle_ms = 1000) {
  StrategyConfig c;
  c.parallelism = parallelism;
  c.min_blocks = min_b;
  c.init_blocks = min_b;
  c.max_blocks = max_b;
  c.idle_timeout_ms = idle_ms;
  c.slots_per_block = 1;
  return c;
}

/// Executor double that only tracks scaling calls.
class FakeScalableExecutor : public Executor {
 public:
  FakeScalableExecutor() : Executor("fake") {}
  void start() override {}
  void submit_task(TaskEnvelope) override {}
  std::size_t pending_count() const override { return 0; }
  ExecutorStatus status() const override { return ExecutorStatus::Running; }
  void shutdown() override {}
  bool supports_scaling() const override { return true; }
  int scale_out(int blocks) override {
    out_calls += blocks;
    active += std::size_t(blocks);
    return blocks;
  }
  int scale_in(const std::vector<std::string>& ids) override {
    in_calls += int(ids.size());
    active -= std::min(active, ids.size());
    return int(ids.size());
  }
  LoadSnapshot load_snapshot() override {
    LoadSnapshot s;
    s.outstanding_tasks = outstanding.load();
    s.active_blocks = active;
    for (std::size_t i = 0; i < active; ++i)
      s.idle_block_ages.emplace_back("b" + std::to_string(i),
                                     outstanding.load() ? 0 : idle_age_us.load());
    return s;
  }
  std::atomic<std::size_t> outstanding{0};
  std::size_t active = 0;
  std::atomic<std::int64_t> idle_age_us{0};
  int out_calls = 0;
  int in_calls = 0;
};

}  // namespace

TEST_CASE("formula: 20 outstanding at parallelism 1 over 1-slot blocks wants 8 of max 8") {
  auto d = strategy_tick(snap(20, 0), cfg(1.0, 0, 8));
  CHECK(d.kind == ScalingDecision::Kind::ScaleOut);
  CHECK(d.out_blocks == 8);  // clamp(ceil(20*1/1)=20, 0, 8)
}

TEST_CASE("formula: parallelism 0.5 halves the demand") {
  auto d = strategy_tick(snap(20, 0), cfg(0.5, 0, 64));
  CHECK(d.out_blocks == 10);  // ceil(20*0.5/1)
}

TEST_CASE("formula: ceil rounds partial blocks up") {
  StrategyConfig c = cfg(1.0, 0, 64);
  c.slots_per_block = 4;
  auto d = strategy_tick(snap(9, 0), c);
  CHECK(d.out_blocks == 3);  // ceil(9/4)
}

TEST_CASE("pending blocks count toward satisfied demand") {
  auto d = strategy_tick(snap(4, 2, 2), cfg(1.0, 0, 8));
  CHECK(d.kind == ScalingDecision::Kind::None);
}

TEST_CASE("idle blocks past the timeout scale in, min_blocks preserved") {
  LoadSnapshot s = snap(0, 3);
  for (auto& [_, age] : s.idle_block_ages) age = 5'000'000;  // 5 s idle
  StrategyConfig c = cfg(1.0, 1, 8, /*idle_ms=*/1000);
  auto d = strategy_tick(s, c);
  CHECK(d.kind == ScalingDecision::Kind::ScaleIn);
  CHECK(d.in_blocks.size() == 2);  // keeps min_blocks=1
}

TEST_CASE("min_blocks 0 drains everything idle") {
  LoadSnapshot s = snap(0, 3);
  for (auto& [_, age] : s.idle_block_ages) age = 60'000'000;
  auto d = strategy_tick(s, cfg(1.0, 0, 8, 1000));
  CHECK(d.in_blocks.size() == 3);
}

TEST_CASE("blocks idle less than the timeout are kept (no thrash)") {
  LoadSnapshot s = snap(0, 3);
  for (auto& [_, age] : s.idle_block_ages) age = 100'000;  // 0.1 s
  auto d = strategy_tick(s, cfg(1.0, 0, 8, 1000));
  CHECK(d.kind == ScalingDecision::Kind::None);
}

TEST_CASE("never scales out and in on the same tick") {
  // Demand below active count but some blocks idle: only scale-in applies.
  LoadSnapshot s = snap(1, 4);
  s.idle_block_ages = {{"b0", 9'000'000}, {"b1", 0}, {"b2", 9'000'000}, {"b3", 0}};
  auto d = strategy_tick(s, cfg(1.0, 0, 8, 1000));
  CHECK(d.kind == ScalingDecision::Kind::ScaleIn);
  CHECK(d.out_blocks == 0);
}

TEST_CASE("scale-out clamps to max_blocks") {
  auto d = strategy_tick(snap(1000, 0), cfg(1.0, 0, 8));
  CHECK(d.out_blocks == 8);
}

TEST_CASE("validation rejects bad parameter ranges") {
  CHECK_THROWS(cfg(0.0, 0, 8).validate());
  CHECK_THROWS(cfg(1.5, 0, 8).validate());
  StrategyConfig bad = cfg(1.0, 4, 2);
  CHECK_THROWS(bad.validate());
  CHECK_NOTHROW(cfg(1.0, 0, 8).validate());
}

TEST_CASE("strategy loop: static adequate capacity produces no scaling events") {
  FakeScalableExecutor ex;
  ex.active = 2;
  StrategyConfig c = cfg(1.0, 2, 8, 10'000);
  c.poll_period_ms = 20;
  StrategyLoop loop(ex, c);
  loop.start();
  ex.outstanding = 2;
  sleep_ms(150);
  loop.stop();
  CHECK(ex.out_calls == 0);
  CHECK(ex.in_calls == 0);
  for (const auto& e : loop.events()) CHECK(e.decision == "none");
}

TEST_CASE("strategy loop rises under load and falls when idle") {
  test::TempDir dir("strat");
  FakeScalableExecutor ex;
  StrategyConfig c = cfg(1.0, 0, 8, 100);
  c.poll_period_ms = 20;
  StrategyLoop loop(ex, c, dir.file("scaling.log"));
  loop.start();
  ex.outstanding = 6;
  sleep_ms(120);
  CHECK(ex.active == 6);
  ex.outstanding = 0;
  ex.idle_age_us = 500'000;
  sleep_ms(200);
  loop.stop();
  CHECK(ex.active == 0);
  // The event log captured both phases.
  bool saw_out = false, saw_in = false;
  for (const auto& e : loop.events()) {
    if (e.decision.rfind("scale_out", 0) == 0) saw_out = true;
    if (e.decision.rfind("scale_in", 0) == 0) saw_in = true;
  }
  CHECK(saw_out);
  CHECK(saw_in);
  std::ifstream log(dir.file("scaling.log"));
  CHECK(log.good());
  std::string first_line;
  std::getline(log, first_line);
  CHECK(first_line.find('\t') != std::string::npos);
}

TEST_CASE("strategy loop refuses an unscalable executor") {
  class Fixed : public FakeScalableExecutor {
   public:
    bool supports_scaling() const override { return false; }
  } ex;
  StrategyLoop loop(ex, cfg(1.0, 0, 4));
  CHECK_THROWS_AS(loop.start(), std::invalid_argument);
}
