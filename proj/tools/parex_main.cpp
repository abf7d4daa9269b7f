// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

// parex: run dataflow programs and reproduce the benchmark suite.
//
//   parex run --config cfg.json hello
//   parex bench latency --executor llex --tasks 1000
//   parex bench throughput --executor htex --tasks 50000 --workers 16
//   parex bench scaling --mode strong --duration-ms 1000 --tasks 64
//   parex bench elasticity
//   parex report --monitor-log run.log
//
// Exit codes: 0 success, 1 task failure, 2 configuration error.

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "parex/bench.hpp"
#include "parex/builtin_apps.hpp"
#include "parex/data_manager.hpp"

namespace {

using namespace parex;

RunConfig default_config() {
  RunConfig cfg;
  ExecutorEntry local;
  local.label = "local";
  local.type = "local";
  local.workers = 4;
  cfg.executors.push_back(local);
  ExecutorEntry htex;
  htex.label = "htex";
  htex.type = "htex";
  htex.workers = 4;
  cfg.executors.push_back(htex);
  ExecutorEntry llex;
  llex.label = "llex";
  llex.type = "llex";
  llex.workers = 2;
  cfg.executors.push_back(llex);
  return cfg;
}

RunConfig config_for(const std::string& path, const std::string& only_executor = "") {
  RunConfig cfg = path.empty() ? default_config() : load_config_file(path);
  if (!only_executor.empty()) {
    // Benches spin up just the executor under test.
    std::vector<ExecutorEntry> kept;
    for (const auto& e : cfg.executors)
      if (e.label == only_executor) kept.push_back(e);
    if (kept.empty())
      throw ConfigError("executors: no executor labeled '" + only_executor + "'");
    cfg.executors = std::move(kept);
  }
  return cfg;
}

std::vector<int> parse_int_list(const std::string& s) {
  std::vector<int> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

int run_program(Engine& engine, DataManager& dm, const std::string& program) {
  auto& reg = AppRegistry::global();
  std::vector<FutureHandle> futs;

  if (program == "hello") {
    FutureHandle f = engine.submit(reg.native("hello"), {Value("World")});
    const Outcome& o = f.result();
    if (!o.ok) {
      std::fprintf(stderr, "task failed: %s\n", o.error.to_string().c_str());
      return 1;
    }
    std::printf("%s\n", o.value.as_string().c_str());
    return 0;
  }

  if (program == "diamond") {
    // a -> {b, c} -> d
    FutureHandle a = engine.submit(reg.native("add"), {Value(1), Value(1)});
    FutureHandle b = engine.submit(reg.native("mul"), {a.ref(), Value(3)});
    FutureHandle c = engine.submit(reg.native("mul"), {a.ref(), Value(5)});
    FutureHandle d = engine.submit(reg.native("add"), {b.ref(), c.ref()});
    futs = {a, b, c, d};
  } else if (program == "pipeline") {
    // shell stage writes a file; native stage reads it back
    FutureHandle w = engine.submit(reg.native("write_file"),
                                   {Value("/tmp/parex-pipeline.txt"), Value("Hello World\n")});
    FutureHandle r = engine.submit(reg.native("read_file"), {w.ref()});
    futs = {w, r};
  } else {
    // Task-list file: one task per line, "app_name arg1 arg2 ...".
    std::ifstream in(program);
    if (!in) {
      std::fprintf(stderr, "unknown program or unreadable task list: %s\n", program.c_str());
      return 2;
    }
    std::string line;
    while (std::getline(in, line)) {
      if (line.empty() || line[0] == '#') continue;
      std::istringstream ls(line);
      std::string name;
      ls >> name;
      ValueList args;
      std::string tok;
      while (ls >> tok) {
        try {
          std::size_t pos = 0;
          long long v = std::stoll(tok, &pos);
          if (pos == tok.size()) {
            args.push_back(Value(std::int64_t(v)));
            continue;
          }
        } catch (...) {
        }
        args.push_back(Value(tok));
      }
      futs.push_back(dm.submit(reg.native(name), std::move(args)));
    }
  }

  RunSummary sum = engine.wait_all();
  for (const auto& f : futs) {
    const Outcome& o = f.result();
    std::printf("task %llu: %s\n", (unsigned long long)f.task_id(),
                o.ok ? o.value.repr().c_str() : o.error.to_string().c_str());
  }
  std::printf("succeeded=%zu failed=%zu memo_hits=%zu\n", sum.succeeded, sum.failed,
              sum.memo_hits);
  return sum.failed == 0 ? 0 : 1;
}

}  // namespace

int main(int argc, char** argv) {
  register_builtin_apps();

  CLI::App app{"parex: dataflow task execution engine"};
  app.require_subcommand(1);
  std::string config_path, monitor_log, output_csv;
  std::uint64_t seed = 0;
  app.add_option("--config", config_path, "run configuration (JSON)");
  app.add_option("--seed", seed, "override the configured PRNG seed");
  app.add_option("--monitor-log", monitor_log, "override the monitor log path");
  app.add_option("--output", output_csv, "write the bench report CSV here");

  auto* run = app.add_subcommand("run", "execute a program under the configured engine");
  std::string program;
  run->add_option("program", program, "hello | diamond | pipeline | task-list file")
      ->required();

  auto* bench = app.add_subcommand("bench", "reproduce the measurement suite");
  bench->require_subcommand(1);

  auto* lat = bench->add_subcommand("latency", "sequential round-trip latency");
  std::string lat_executor = "llex";
  int lat_tasks = 1000;
  lat->add_option("--executor", lat_executor);
  lat->add_option("--tasks", lat_tasks);

  auto* thr = bench->add_subcommand("throughput", "no-op task throughput");
  std::string thr_executor = "htex";
  int thr_tasks = 50000, thr_workers = 0;
  thr->add_option("--executor", thr_executor);
  thr->add_option("--tasks", thr_tasks);
  thr->add_option("--workers", thr_workers, "override worker count");

  auto* scl = bench->add_subcommand("scaling", "strong/weak scaling sweep");
  std::string scl_mode = "strong", scl_workers = "1,2,4,8,16,32", scl_executor = "htex";
  int scl_duration = 0, scl_tasks = 1000;
  scl->add_option("--mode", scl_mode, "strong | weak");
  scl->add_option("--duration-ms", scl_duration);
  scl->add_option("--tasks", scl_tasks, "total tasks (strong mode)");
  scl->add_option("--workers", scl_workers, "comma-separated worker counts");
  scl->add_option("--executor", scl_executor);

  auto* ela = bench->add_subcommand("elasticity", "four-stage workflow, static vs elastic");
  ElasticityParams ep;
  double ela_parallelism = 1.0;
  ela->add_option("--wide-tasks", ep.wide_tasks);
  ela->add_option("--wide-sleep-ms", ep.wide_sleep_ms);
  ela->add_option("--reduce-sleep-ms", ep.reduce_sleep_ms);
  ela->add_option("--queue-delay-ms", ep.queue_delay_ms);
  ela->add_option("--idle-timeout-ms", ep.idle_timeout_ms);
  ela->add_option("--parallelism", ela_parallelism, "must stay in (0,1]");

  auto* rpt = app.add_subcommand("report", "summarize a monitor log");
  std::string rpt_log;
  rpt->add_option("--monitor-log", rpt_log)->required();

  CLI11_PARSE(app, argc, argv);

  try {
    if (*run) {
      RunConfig cfg = config_for(config_path);
      if (seed) cfg.seed = seed;
      if (!monitor_log.empty()) cfg.monitor_log = monitor_log;
      BuiltEngine built = build_engine(cfg, "cli-run");
      built.start_strategies();
      DataManager dm(*built.engine);
      int rc = run_program(*built.engine, dm, program);
      built.stop();
      return rc;
    }

    if (*lat) {
      RunConfig cfg = config_for(config_path, lat_executor);
      if (seed) cfg.seed = seed;
      BenchReport rep = bench_latency(cfg, lat_executor, lat_tasks);
      std::printf("%s", rep.text().c_str());
      if (!output_csv.empty()) rep.write_csv(output_csv);
      return 0;
    }

    if (*thr) {
      RunConfig cfg = config_for(config_path, thr_executor);
      if (seed) cfg.seed = seed;
      if (thr_workers > 0)
        for (auto& e : cfg.executors) e.workers = thr_workers;
      BenchReport rep = bench_throughput(cfg, thr_executor, thr_tasks);
      std::printf("%s", rep.text().c_str());
      if (!output_csv.empty()) rep.write_csv(output_csv);
      return 0;
    }

    if (*scl) {
      RunConfig cfg = config_for(config_path, scl_executor);
      if (seed) cfg.seed = seed;
      BenchReport rep;
      auto points = bench_scaling(cfg, scl_executor, scl_mode == "strong", scl_duration,
                                  scl_tasks, parse_int_list(scl_workers), &rep);
      std::printf("workers\ttasks\tcompletion_s\n");
      for (const auto& p : points)
        std::printf("%d\t%d\t%.3f\n", p.workers, p.tasks, p.completion_s);
      if (!output_csv.empty()) rep.write_csv(output_csv);
      return 0;
    }

    if (*ela) {
      if (!(ela_parallelism > 0.0) || ela_parallelism > 1.0)
        throw ConfigError("strategy.parallelism: must be in (0,1]");
      if (seed) ep.seed = seed;
      ElasticityResult st = bench_elasticity(false, ep);
      ElasticityResult el = bench_elasticity(true, ep);
      std::printf("static : utilization %.1f%%  makespan %.2fs\n", st.utilization * 100,
                  st.makespan_s);
      std::printf("elastic: utilization %.1f%%  makespan %.2fs (+%.1f%%)\n",
                  el.utilization * 100, el.makespan_s,
                  st.makespan_s > 0 ? (el.makespan_s / st.makespan_s - 1) * 100 : 0);
      std::printf("elastic block timeline (t_s active):\n");
      for (std::size_t i = 0; i < el.block_timeline.size(); i += 4)
        std::printf("  %.1f\t%zu\n", double(el.block_timeline[i].first) / 1e6,
                    el.block_timeline[i].second);
      return 0;
    }

    if (*rpt) {
      MonitorLog log = read_monitor_log(rpt_log);
      auto histories = replay_task_histories(log);
      UtilizationReport util = compute_utilization(log);
      std::printf("run_id: %s\nseed: %llu\ntasks: %zu\n", log.header.run_id.c_str(),
                  (unsigned long long)log.header.seed, histories.size());
      std::printf("makespan: %.3fs\nutilization: %.1f%%\n", double(util.makespan_us) / 1e6,
                  util.utilization * 100);
      return 0;
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return 2;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  }
  return 0;
}
