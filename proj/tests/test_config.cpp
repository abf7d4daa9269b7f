// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include "parex/config.hpp"

using namespace parex;

namespace {

const char* kFullConfig = R"({
  "executors": [
    {"label": "local", "type": "local", "workers": 4},
    {"label": "htex1", "type": "htex", "workers": 2, "prefetch": 2,
     "heartbeat_period_ms": 500, "heartbeat_threshold_ms": 1500,
     "provider": {"type": "sim", "nodes_per_block": 2, "init_blocks": 1,
                  "partition": "desk", "walltime_ms": 60000,
                  "queue_delay_min_ms": 100, "queue_delay_max_ms": 200,
                  "launcher": {"kind": "per_node", "agents_per_node": 1}}},
    {"label": "llex1", "type": "llex", "workers": 2, "replication_factor": 2,
     "task_timeout_ms": 100, "max_timed_retries": 2}
  ],
  "strategy": {"enabled": true, "parallelism": 0.5, "poll_period_ms": 250,
               "idle_timeout_ms": 2000, "min_blocks": 1, "max_blocks": 4},
  "checkpoint": {"enabled": true, "files": ["a.ckpt", "b.ckpt"]},
  "retries": 2,
  "monitor_log": "/tmp/m.log",
  "seed": 7
})";

}  // namespace

TEST_CASE("full config parses with every section") {
  RunConfig cfg = parse_config(kFullConfig);
  REQUIRE(cfg.executors.size() == 3);
  CHECK(cfg.executors[0].type == "local");
  CHECK(cfg.executors[1].provider.type == "sim");
  CHECK(cfg.executors[1].provider.nodes_per_block == 2);
  CHECK(cfg.executors[1].provider.launcher.kind == "per_node");
  CHECK(cfg.executors[2].replication_factor == 2);
  CHECK(cfg.strategy.enabled);
  CHECK(cfg.strategy.parallelism == doctest::Approx(0.5));
  CHECK(cfg.checkpointing);
  CHECK(cfg.checkpoint_files.size() == 2);
  CHECK(cfg.retries == 2);
  CHECK(cfg.seed == 7);
}

TEST_CASE("parse-serialize-parse is a fixed point") {
  RunConfig cfg = parse_config(kFullConfig);
  std::string once = serialize_config(cfg);
  RunConfig cfg2 = parse_config(once);
  std::string twice = serialize_config(cfg2);
  CHECK(once == twice);
}

TEST_CASE("duplicate labels name the offending field") {
  const char* dup = R"({"executors": [
    {"label": "x", "type": "local"}, {"label": "x", "type": "local"}]})";
  try {
    parse_config(dup);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("executors[1].label") != std::string::npos);
  }
}

TEST_CASE("unknown executor type is rejected with its path") {
  const char* bad = R"({"executors": [{"label": "x", "type": "warp"}]})";
  try {
    parse_config(bad);
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    CHECK(std::string(e.what()).find("executors[0].type") != std::string::npos);
  }
}

TEST_CASE("parallelism outside (0,1] is rejected") {
  const char* zero = R"({"executors": [{"label": "x", "type": "local"}],
                         "strategy": {"enabled": true, "parallelism": 0.0}})";
  CHECK_THROWS_AS(parse_config(zero), ConfigError);
  const char* big = R"({"executors": [{"label": "x", "type": "local"}],
                        "strategy": {"enabled": true, "parallelism": 1.5}})";
  CHECK_THROWS_AS(parse_config(big), ConfigError);
}

TEST_CASE("missing executors section is rejected") {
  CHECK_THROWS_AS(parse_config("{}"), ConfigError);
  CHECK_THROWS_AS(parse_config(R"({"executors": []})"), ConfigError);
}

TEST_CASE("malformed json is a config error, not a crash") {
  CHECK_THROWS_AS(parse_config("{nope"), ConfigError);
}

TEST_CASE("htex threshold must exceed the heartbeat period") {
  const char* bad = R"({"executors": [{"label": "h", "type": "htex",
    "heartbeat_period_ms": 1000, "heartbeat_threshold_ms": 1000}]})";
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("failure_rate outside [0,1] is rejected") {
  const char* bad = R"({"executors": [{"label": "h", "type": "htex",
    "provider": {"type": "sim", "failure_rate": 1.5}}]})";
  CHECK_THROWS_AS(parse_config(bad), ConfigError);
}

TEST_CASE("defaults: minimal config gets sane htex values") {
  RunConfig cfg = parse_config(R"({"executors": [{"label": "h", "type": "htex"}]})");
  CHECK(cfg.executors[0].heartbeat_period_ms == 2000);
  CHECK(cfg.executors[0].heartbeat_threshold_ms == 6000);  // 3x period
  CHECK(cfg.executors[0].batch_size_max == 128);
  CHECK(cfg.executors[0].provider.type == "local");
}
