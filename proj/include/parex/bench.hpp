// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <string>
#include <vector>

#include "parex/config.hpp"
#include "parex/stats.hpp"

namespace parex {

/// One experiment's results: raw samples always ride along with the summary.
struct BenchReport {
  std::string experiment;
  std::map<std::string, std::string> parameters;
  std::vector<double> samples;  // unit named in parameters["unit"]
  SampleSummary summary;
  std::map<std::string, std::string> environment;

  void finalize();  // fills summary + environment fingerprint
  std::string text() const;
  void write_csv(const std::string& path) const;
};

/// Sequential no-op round trips through one executor, pre-connected workers.
/// Samples are per-task latencies in milliseconds.
BenchReport bench_latency(const RunConfig& cfg, const std::string& executor, int tasks);

/// N no-ops submitted as fast as possible; reports tasks/second.
BenchReport bench_throughput(const RunConfig& cfg, const std::string& executor, int tasks);

struct ScalingPoint {
  int workers = 0;
  int tasks = 0;
  double completion_s = 0;
};

/// Strong: fixed task count over growing worker counts. Weak: 10 tasks per
/// worker. Sleep duration per task in ms (0 = no-op).
std::vector<ScalingPoint> bench_scaling(const RunConfig& base, const std::string& executor,
                                        bool strong, int duration_ms, int total_tasks,
                                        const std::vector<int>& worker_counts,
                                        BenchReport* report = nullptr);

struct ElasticityParams {
  int wide_tasks = 20;
  int wide_sleep_ms = 2000;   // paper durations divided by 50
  int reduce_sleep_ms = 1000;
  int queue_delay_ms = 120;
  int idle_timeout_ms = 250;
  int poll_period_ms = 100;
  std::uint64_t seed = 1;
  std::string monitor_log;
  std::string scaling_log;
};

struct ElasticityResult {
  double utilization = 0;
  double makespan_s = 0;
  // (timestamp_us since run start, active blocks) samples over the run
  std::vector<std::pair<std::int64_t, std::size_t>> block_timeline;
};

/// The four-stage workflow (wide 20 -> 1 -> wide 20 -> 1, every task a
/// sleep) on the simulated provider, with or without the strategy loop.
ElasticityResult bench_elasticity(bool elastic, const ElasticityParams& params);

}  // namespace parex
