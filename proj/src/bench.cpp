// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/bench.hpp"

#include <unistd.h>

#include <cstdio>
#include <fstream>
#include <sstream>
#include <thread>

#include "parex/builtin_apps.hpp"
#include "parex/clock.hpp"
#include "parex/htex_executor.hpp"
#include "parex/llex_executor.hpp"

namespace parex {

namespace {

void wait_ready(Engine& engine, const std::string& label, int slots) {
  Executor* ex = engine.executor(label);
  if (auto* htex = dynamic_cast<HtexExecutor*>(ex)) {
    htex->wait_for_capacity(slots, 30000);
  } else if (auto* llex = dynamic_cast<LlexExecutor*>(ex)) {
    llex->wait_for_workers(slots, 30000);
  }
}

int executor_slots(const RunConfig& cfg, const std::string& label) {
  for (const auto& e : cfg.executors)
    if (e.label == label) {
      if (e.type == "htex") return e.workers * e.provider.nodes_per_block;
      return e.workers;
    }
  return 1;
}

}  // namespace

void BenchReport::finalize() {
  summary = summarize(samples);
  char host[256] = {0};
  ::gethostname(host, sizeof(host) - 1);
  environment["host"] = host;
  environment["hardware_threads"] = std::to_string(std::thread::hardware_concurrency());
  environment["wall_us"] = std::to_string(wall_us());
}

std::string BenchReport::text() const {
  std::ostringstream os;
  os << "experiment: " << experiment << "\n";
  for (const auto& [k, v] : parameters) os << "  " << k << ": " << v << "\n";
  os.setf(std::ios::fixed);
  os.precision(3);
  os << "  samples: " << summary.count << "\n";
  if (summary.count > 0) {
    os << "  min: " << summary.min << "  median: " << summary.median
       << "  mean: " << summary.mean << "  p99: " << summary.p99
       << "  max: " << summary.max << "\n";
  }
  return os.str();
}

void BenchReport::write_csv(const std::string& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path);
  out << "# experiment," << experiment << "\n";
  for (const auto& [k, v] : parameters) out << "# param," << k << "," << v << "\n";
  for (const auto& [k, v] : environment) out << "# env," << k << "," << v << "\n";
  out << "# summary,count," << summary.count << ",min," << summary.min << ",median,"
      << summary.median << ",mean," << summary.mean << ",p99," << summary.p99 << ",max,"
      << summary.max << "\n";
  out << "sample\n";
  for (double s : samples) out << s << "\n";
}

BenchReport bench_latency(const RunConfig& cfg, const std::string& executor, int tasks) {
  register_builtin_apps();
  BenchReport rep;
  rep.experiment = "latency";
  rep.parameters = {{"executor", executor}, {"tasks", std::to_string(tasks)}, {"unit", "ms"}};

  BuiltEngine built = build_engine(cfg, "bench-latency");
  wait_ready(*built.engine, executor, 1);

  AppSpec noop = AppRegistry::global().native("noop");
  Engine::SubmitOptions opts;
  opts.executor_hint = executor;
  opts.memoize = false;

  // Warm the path end to end before sampling.
  for (int i = 0; i < 20; ++i)
    built.engine->submit(noop, {}, {}, opts).result();

  rep.samples.reserve(std::size_t(tasks));
  for (int i = 0; i < tasks; ++i) {
    std::int64_t t0 = monotonic_us();
    FutureHandle f = built.engine->submit(noop, {}, {}, opts);
    f.result();
    rep.samples.push_back(double(monotonic_us() - t0) / 1000.0);
  }
  built.stop();
  rep.finalize();
  return rep;
}

BenchReport bench_throughput(const RunConfig& cfg, const std::string& executor, int tasks) {
  register_builtin_apps();
  BenchReport rep;
  rep.experiment = "throughput";
  rep.parameters = {{"executor", executor},
                    {"tasks", std::to_string(tasks)},
                    {"unit", "tasks_per_s"}};

  BuiltEngine built = build_engine(cfg, "bench-throughput");
  wait_ready(*built.engine, executor, executor_slots(cfg, executor));

  AppSpec noop = AppRegistry::global().native("noop");
  Engine::SubmitOptions opts;
  opts.executor_hint = executor;
  opts.memoize = false;

  std::int64_t t0 = monotonic_us();
  for (int i = 0; i < tasks; ++i) built.engine->submit(noop, {}, {}, opts);
  RunSummary sum = built.engine->wait_all();
  double elapsed_s = double(monotonic_us() - t0) / 1e6;
  built.stop();

  if (tasks > 0 && elapsed_s > 0) rep.samples.push_back(double(tasks) / elapsed_s);
  rep.parameters["elapsed_s"] = std::to_string(elapsed_s);
  rep.parameters["failed"] = std::to_string(sum.failed);
  rep.finalize();
  return rep;
}

std::vector<ScalingPoint> bench_scaling(const RunConfig& base, const std::string& executor,
                                        bool strong, int duration_ms, int total_tasks,
                                        const std::vector<int>& worker_counts,
                                        BenchReport* report) {
  register_builtin_apps();
  std::vector<ScalingPoint> points;
  for (int w : worker_counts) {
    RunConfig cfg = base;
    for (auto& e : cfg.executors)
      if (e.label == executor) e.workers = w;

    BuiltEngine built = build_engine(cfg, "bench-scaling");
    wait_ready(*built.engine, executor, w);

    int n = strong ? total_tasks : 10 * w;
    AppSpec app = AppRegistry::global().native(duration_ms > 0 ? "sleep_ms" : "noop");
    ValueList args;
    if (duration_ms > 0) args.push_back(Value(std::int64_t(duration_ms)));
    Engine::SubmitOptions opts;
    opts.executor_hint = executor;
    opts.memoize = false;

    std::int64_t t0 = monotonic_us();
    for (int i = 0; i < n; ++i) built.engine->submit(app, args, {}, opts);
    built.engine->wait_all();
    double elapsed_s = double(monotonic_us() - t0) / 1e6;
    built.stop();

    points.push_back(ScalingPoint{w, n, elapsed_s});
  }
  if (report) {
    report->experiment = strong ? "scaling-strong" : "scaling-weak";
    report->parameters = {{"executor", executor},
                          {"duration_ms", std::to_string(duration_ms)},
                          {"unit", "completion_s"}};
    for (const auto& p : points) report->samples.push_back(p.completion_s);
    report->finalize();
  }
  return points;
}

ElasticityResult bench_elasticity(bool elastic, const ElasticityParams& params) {
  register_builtin_apps();

  RunConfig cfg;
  ExecutorEntry e;
  e.label = "htex";
  e.type = "htex";
  e.workers = 1;  // one worker per block: block count == worker count
  e.heartbeat_period_ms = 500;
  e.heartbeat_threshold_ms = 2000;
  e.provider.type = "sim";
  e.provider.queue_delay_min_ms = params.queue_delay_ms;
  e.provider.queue_delay_max_ms = params.queue_delay_ms;
  e.provider.init_blocks = elastic ? 1 : params.wide_tasks;
  e.provider.max_active_blocks = params.wide_tasks + 2;
  cfg.executors.push_back(e);
  cfg.seed = params.seed;
  cfg.monitor_log = params.monitor_log.empty()
                        ? "/tmp/parex-elasticity-" + std::to_string(::getpid()) + ".log"
                        : params.monitor_log;
  cfg.strategy.enabled = elastic;
  cfg.strategy.parallelism = 1.0;
  cfg.strategy.poll_period_ms = params.poll_period_ms;
  cfg.strategy.idle_timeout_ms = params.idle_timeout_ms;
  cfg.strategy.min_blocks = 1;
  cfg.strategy.max_blocks = params.wide_tasks;

  BuiltEngine built = build_engine(cfg, elastic ? "elastic" : "static");
  auto* htex = dynamic_cast<HtexExecutor*>(built.engine->executor("htex"));

  // Block-count timeline sampler.
  std::atomic<bool> stop_sampler{false};
  std::vector<std::pair<std::int64_t, std::size_t>> timeline;
  std::mutex timeline_mu;
  std::int64_t sample_t0 = monotonic_us();
  std::thread sampler([&] {
    while (!stop_sampler.load()) {
      std::size_t active = 0;
      for (const auto& b : htex->blocks())
        if (b.state == "Active") ++active;
      {
        std::lock_guard lk(timeline_mu);
        timeline.emplace_back(monotonic_us() - sample_t0, active);
      }
      sleep_ms(50);
    }
  });

  if (!elastic) htex->wait_for_capacity(params.wide_tasks, 30000);
  if (elastic) built.start_strategies();

  AppSpec sleep_app = AppRegistry::global().native("sleep_ms");
  Engine::SubmitOptions opts;
  opts.executor_hint = "htex";
  opts.memoize = false;

  auto wide = [&](const std::vector<FutureHandle>& deps) {
    std::vector<FutureHandle> futs;
    for (int i = 0; i < params.wide_tasks; ++i) {
      ValueList args{Value(std::int64_t(params.wide_sleep_ms))};
      for (const auto& d : deps) args.push_back(d.ref());
      futs.push_back(built.engine->submit(sleep_app, args, {}, opts));
    }
    return futs;
  };
  auto reduce = [&](const std::vector<FutureHandle>& deps) {
    ValueList args{Value(std::int64_t(params.reduce_sleep_ms))};
    for (const auto& d : deps) args.push_back(d.ref());
    return std::vector<FutureHandle>{built.engine->submit(sleep_app, args, {}, opts)};
  };

  auto s1 = wide({});
  auto s2 = reduce(s1);
  auto s3 = wide(s2);
  auto s4 = reduce(s3);
  (void)s4;
  built.engine->wait_all();

  built.stop();
  stop_sampler = true;
  sampler.join();

  MonitorLog log = read_monitor_log(cfg.monitor_log);
  UtilizationReport util = compute_utilization(log);

  ElasticityResult res;
  res.utilization = util.utilization;
  res.makespan_s = double(util.makespan_us) / 1e6;
  {
    std::lock_guard lk(timeline_mu);
    res.block_timeline = std::move(timeline);
  }
  return res;
}

}  // namespace parex
