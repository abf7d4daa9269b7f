// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/config.hpp"

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "parex/builtin_apps.hpp"
#include "parex/clock.hpp"
#include "parex/htex_executor.hpp"
#include "parex/llex_executor.hpp"
#include "parex/local_executor.hpp"

namespace parex {

using nlohmann::json;

namespace {

template <typename T>
T field(const json& j, const std::string& path, const char* key, T dflt) {
  if (!j.contains(key)) return dflt;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(path + "." + key + ": wrong type");
  }
}

LauncherEntry parse_launcher(const json& j, const std::string& path) {
  LauncherEntry l;
  l.kind = field<std::string>(j, path, "kind", "single");
  if (l.kind != "single" && l.kind != "per_node")
    throw ConfigError(path + ".kind: unknown launcher '" + l.kind + "'");
  l.agents_per_node = field<int>(j, path, "agents_per_node", 1);
  return l;
}

ProviderEntry parse_provider(const json& j, const std::string& path) {
  ProviderEntry p;
  p.type = field<std::string>(j, path, "type", "local");
  if (p.type != "local" && p.type != "sim")
    throw ConfigError(path + ".type: unknown provider '" + p.type + "'");
  p.nodes_per_block = field<int>(j, path, "nodes_per_block", 1);
  p.init_blocks = field<int>(j, path, "init_blocks", 1);
  p.partition = field<std::string>(j, path, "partition", "sim");
  p.walltime_ms = field<int>(j, path, "walltime_ms", 0);
  p.queue_delay_min_ms = field<int>(j, path, "queue_delay_min_ms", 0);
  p.queue_delay_max_ms = field<int>(j, path, "queue_delay_max_ms", p.queue_delay_min_ms);
  p.failure_rate = field<double>(j, path, "failure_rate", 0.0);
  p.max_active_blocks = field<int>(j, path, "max_active_blocks", 64);
  if (j.contains("launcher")) p.launcher = parse_launcher(j["launcher"], path + ".launcher");
  return p;
}

json launcher_json(const LauncherEntry& l) {
  return json{{"kind", l.kind}, {"agents_per_node", l.agents_per_node}};
}

json provider_json(const ProviderEntry& p) {
  return json{{"type", p.type},
              {"nodes_per_block", p.nodes_per_block},
              {"init_blocks", p.init_blocks},
              {"partition", p.partition},
              {"walltime_ms", p.walltime_ms},
              {"queue_delay_min_ms", p.queue_delay_min_ms},
              {"queue_delay_max_ms", p.queue_delay_max_ms},
              {"failure_rate", p.failure_rate},
              {"max_active_blocks", p.max_active_blocks},
              {"launcher", launcher_json(p.launcher)}};
}

}  // namespace

RunConfig parse_config(const std::string& json_text) {
  json root;
  try {
    root = json::parse(json_text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  RunConfig cfg;
  if (!root.contains("executors") || !root["executors"].is_array() ||
      root["executors"].empty())
    throw ConfigError("executors: need at least one executor");

  std::size_t i = 0;
  for (const auto& je : root["executors"]) {
    std::string path = "executors[" + std::to_string(i) + "]";
    ExecutorEntry e;
    e.label = field<std::string>(je, path, "label", "");
    if (e.label.empty()) throw ConfigError(path + ".label: required");
    e.type = field<std::string>(je, path, "type", "local");
    if (e.type != "local" && e.type != "htex" && e.type != "llex")
      throw ConfigError(path + ".type: unknown executor type '" + e.type + "'");
    e.workers = field<int>(je, path, "workers", 1);
    e.prefetch = field<int>(je, path, "prefetch", 0);
    e.batch_size_max = field<int>(je, path, "batch_size_max", 128);
    e.heartbeat_period_ms = field<int>(je, path, "heartbeat_period_ms", 2000);
    e.heartbeat_threshold_ms =
        field<int>(je, path, "heartbeat_threshold_ms", 3 * e.heartbeat_period_ms);
    e.replication_factor = field<int>(je, path, "replication_factor", 1);
    e.task_timeout_ms = field<int>(je, path, "task_timeout_ms", 0);
    e.max_timed_retries = field<int>(je, path, "max_timed_retries", 0);
    if (je.contains("provider")) e.provider = parse_provider(je["provider"], path + ".provider");
    cfg.executors.push_back(std::move(e));
    ++i;
  }

  if (root.contains("strategy")) {
    const auto& js = root["strategy"];
    cfg.strategy.enabled = field<bool>(js, "strategy", "enabled", true);
    cfg.strategy.parallelism = field<double>(js, "strategy", "parallelism", 1.0);
    cfg.strategy.poll_period_ms = field<int>(js, "strategy", "poll_period_ms", 1000);
    cfg.strategy.idle_timeout_ms = field<int>(js, "strategy", "idle_timeout_ms", 10000);
    cfg.strategy.min_blocks = field<int>(js, "strategy", "min_blocks", 0);
    cfg.strategy.max_blocks = field<int>(js, "strategy", "max_blocks", 8);
  }

  if (root.contains("checkpoint")) {
    cfg.checkpointing = field<bool>(root["checkpoint"], "checkpoint", "enabled", false);
    if (root["checkpoint"].contains("files"))
      for (const auto& f : root["checkpoint"]["files"])
        cfg.checkpoint_files.push_back(f.get<std::string>());
  }
  cfg.retries = field<int>(root, "config", "retries", 0);
  cfg.monitor_log = field<std::string>(root, "config", "monitor_log", "");
  cfg.seed = field<std::uint64_t>(root, "config", "seed", 1);
  cfg.sandbox_root = field<std::string>(root, "config", "sandbox_root", "");
  if (root.contains("task_timeout_ms") && !root["task_timeout_ms"].is_null())
    cfg.task_timeout_ms = root["task_timeout_ms"].get<std::int64_t>();

  validate_config(cfg);
  return cfg;
}

RunConfig load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("config: cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_config(ss.str());
}

void validate_config(const RunConfig& cfg) {
  std::set<std::string> labels;
  std::size_t i = 0;
  for (const auto& e : cfg.executors) {
    std::string path = "executors[" + std::to_string(i) + "]";
    if (!labels.insert(e.label).second)
      throw ConfigError(path + ".label: duplicate label '" + e.label + "'");
    if (e.workers < 1) throw ConfigError(path + ".workers: must be >= 1");
    if (e.prefetch < 0) throw ConfigError(path + ".prefetch: must be >= 0");
    if (e.type == "htex" && e.heartbeat_threshold_ms <= e.heartbeat_period_ms)
      throw ConfigError(path + ".heartbeat_threshold_ms: must exceed heartbeat_period_ms");
    if (e.replication_factor < 1)
      throw ConfigError(path + ".replication_factor: must be >= 1");
    if (e.provider.failure_rate < 0.0 || e.provider.failure_rate > 1.0)
      throw ConfigError(path + ".provider.failure_rate: must be within [0,1]");
    if (e.provider.nodes_per_block < 1)
      throw ConfigError(path + ".provider.nodes_per_block: must be >= 1");
    ++i;
  }
  if (cfg.strategy.enabled) {
    if (!(cfg.strategy.parallelism > 0.0) || cfg.strategy.parallelism > 1.0)
      throw ConfigError("strategy.parallelism: must be in (0,1]");
    if (cfg.strategy.min_blocks > cfg.strategy.max_blocks)
      throw ConfigError("strategy.min_blocks: exceeds max_blocks");
  }
  if (cfg.retries < 0) throw ConfigError("retries: must be >= 0");
}

std::string serialize_config(const RunConfig& cfg) {
  json root;
  json executors = json::array();
  for (const auto& e : cfg.executors) {
    executors.push_back(json{{"label", e.label},
                             {"type", e.type},
                             {"workers", e.workers},
                             {"prefetch", e.prefetch},
                             {"batch_size_max", e.batch_size_max},
                             {"heartbeat_period_ms", e.heartbeat_period_ms},
                             {"heartbeat_threshold_ms", e.heartbeat_threshold_ms},
                             {"replication_factor", e.replication_factor},
                             {"task_timeout_ms", e.task_timeout_ms},
                             {"max_timed_retries", e.max_timed_retries},
                             {"provider", provider_json(e.provider)}});
  }
  root["executors"] = executors;
  root["strategy"] = json{{"enabled", cfg.strategy.enabled},
                          {"parallelism", cfg.strategy.parallelism},
                          {"poll_period_ms", cfg.strategy.poll_period_ms},
                          {"idle_timeout_ms", cfg.strategy.idle_timeout_ms},
                          {"min_blocks", cfg.strategy.min_blocks},
                          {"max_blocks", cfg.strategy.max_blocks}};
  root["checkpoint"] = json{{"enabled", cfg.checkpointing}, {"files", cfg.checkpoint_files}};
  root["retries"] = cfg.retries;
  root["monitor_log"] = cfg.monitor_log;
  root["seed"] = cfg.seed;
  root["sandbox_root"] = cfg.sandbox_root;
  if (cfg.task_timeout_ms) root["task_timeout_ms"] = *cfg.task_timeout_ms;
  return root.dump(2);
}

BuiltEngine build_engine(const RunConfig& cfg, const std::string& run_id) {
  validate_config(cfg);
  register_builtin_apps();

  EngineConfig ec;
  ec.max_retries = cfg.retries;
  ec.checkpointing = cfg.checkpointing;
  if (cfg.checkpointing && !cfg.checkpoint_files.empty())
    ec.checkpoint_write_path = cfg.checkpoint_files.front();
  for (const auto& f : cfg.checkpoint_files)
    if (std::ifstream(f).good()) ec.checkpoint_load_paths.push_back(f);
  ec.seed = cfg.seed;
  ec.task_timeout_ms = cfg.task_timeout_ms;
  ec.run_id = run_id;
  if (!cfg.monitor_log.empty())
    ec.monitor = std::make_shared<FileSink>(cfg.monitor_log, run_id, cfg.seed, wall_us());

  BuiltEngine built;
  built.engine = std::make_unique<Engine>(std::move(ec));

  for (const auto& e : cfg.executors) {
    LauncherSpec launcher;
    if (e.provider.launcher.kind == "per_node") {
      launcher.kind = LauncherSpec::Kind::PerNode;
      launcher.agents_per_node = e.provider.launcher.agents_per_node;
    }
    std::shared_ptr<Provider> provider;
    if (e.provider.type == "sim") {
      SimLrmConfig sc;
      sc.queue_delay_min_ms = e.provider.queue_delay_min_ms;
      sc.queue_delay_max_ms = e.provider.queue_delay_max_ms;
      sc.max_active_blocks = e.provider.max_active_blocks;
      sc.failure_rate = e.provider.failure_rate;
      sc.walltime_ms = e.provider.walltime_ms;
      sc.partition = e.provider.partition;
      sc.seed = cfg.seed;
      provider = std::make_shared<SimLrmProvider>(sc, launcher);
    } else {
      provider = std::make_shared<LocalProvider>(launcher);
    }

    std::string sandbox =
        cfg.sandbox_root.empty() ? "" : cfg.sandbox_root + "/" + e.label;

    if (e.type == "local") {
      built.engine->add_executor(std::make_shared<LocalExecutor>(
          e.label, e.workers,
          sandbox.empty() ? "/tmp/parex-local-" + std::to_string(::getpid()) : sandbox));
    } else if (e.type == "htex") {
      HtexConfig hc;
      hc.label = e.label;
      hc.workers_per_node = e.workers;
      hc.prefetch_capacity = e.prefetch;
      hc.heartbeat_period_ms = e.heartbeat_period_ms;
      hc.heartbeat_threshold_ms = e.heartbeat_threshold_ms;
      hc.batch_size_max = e.batch_size_max;
      hc.nodes_per_block = e.provider.nodes_per_block;
      hc.init_blocks = e.provider.init_blocks;
      hc.seed = cfg.seed;
      if (!sandbox.empty()) hc.sandbox_root = sandbox;
      built.engine->add_executor(std::make_shared<HtexExecutor>(hc, provider));
    } else {  // llex
      LlexConfig lc;
      lc.label = e.label;
      lc.workers = e.workers;
      lc.replication_factor = e.replication_factor;
      lc.task_timeout_ms = e.task_timeout_ms;
      lc.max_timed_retries = e.max_timed_retries;
      if (!sandbox.empty()) lc.sandbox_root = sandbox;
      built.engine->add_executor(std::make_shared<LlexExecutor>(lc, provider));
    }
  }

  built.engine->start();

  if (cfg.strategy.enabled) {
    for (const auto& e : cfg.executors) {
      Executor* ex = built.engine->executor(e.label);
      if (!ex || !ex->supports_scaling()) continue;
      StrategyConfig sc;
      sc.parallelism = cfg.strategy.parallelism;
      sc.poll_period_ms = cfg.strategy.poll_period_ms;
      sc.idle_timeout_ms = cfg.strategy.idle_timeout_ms;
      sc.min_blocks = cfg.strategy.min_blocks;
      sc.max_blocks = cfg.strategy.max_blocks;
      sc.init_blocks = e.provider.init_blocks;
      sc.slots_per_block = std::max(1, (e.workers + e.prefetch) * e.provider.nodes_per_block);
      built.strategies.push_back(std::make_unique<StrategyLoop>(*ex, sc));
    }
  }
  return built;
}

}  // namespace parex
