// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/monitor.hpp"

#include <algorithm>
#include <cinttypes>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

namespace parex {

namespace {

// Detail values may contain anything; keep the line format parseable.
std::string escape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (char c : s) {
    switch (c) {
      case '\t': out += "\\t"; break;
      case '\n': out += "\\n"; break;
      case '\\': out += "\\\\"; break;
      case ',': out += "\\c"; break;
      case '=': out += "\\e"; break;
      default: out.push_back(c);
    }
  }
  return out;
}

std::string unescape(const std::string& s) {
  std::string out;
  out.reserve(s.size());
  for (std::size_t i = 0; i < s.size(); ++i) {
    if (s[i] != '\\' || i + 1 == s.size()) {
      out.push_back(s[i]);
      continue;
    }
    switch (s[++i]) {
      case 't': out.push_back('\t'); break;
      case 'n': out.push_back('\n'); break;
      case 'c': out.push_back(','); break;
      case 'e': out.push_back('='); break;
      default: out.push_back(s[i]);
    }
  }
  return out;
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (std::size_t i = 0; i <= s.size(); ++i) {
    if (i == s.size() || s[i] == sep) {
      out.push_back(s.substr(start, i - start));
      start = i + 1;
    }
  }
  return out;
}

}  // namespace

const char* MonitorEvent::kind_name(Kind k) {
  switch (k) {
    case Kind::StateChange: return "state";
    case Kind::Dispatch: return "dispatch";
    case Kind::ManagerEvent: return "manager";
    case Kind::BlockEvent: return "block";
    case Kind::StageEvent: return "stage";
  }
  return "?";
}

std::optional<MonitorEvent::Kind> MonitorEvent::kind_from_name(const std::string& s) {
  if (s == "state") return Kind::StateChange;
  if (s == "dispatch") return Kind::Dispatch;
  if (s == "manager") return Kind::ManagerEvent;
  if (s == "block") return Kind::BlockEvent;
  if (s == "stage") return Kind::StageEvent;
  return std::nullopt;
}

FileSink::FileSink(const std::string& path, const std::string& run_id, std::uint64_t seed,
                   std::int64_t epoch_wall_us) {
  f_ = std::fopen(path.c_str(), "w");
  if (!f_) throw std::runtime_error("cannot open monitor log: " + path);
  std::fprintf(f_, "#parex-monitor\tv1\trun_id=%s\tseed=%llu\tepoch_us=%lld\n",
               run_id.c_str(), static_cast<unsigned long long>(seed),
               static_cast<long long>(epoch_wall_us));
  std::fflush(f_);
}

FileSink::~FileSink() {
  if (f_) std::fclose(f_);
}

void FileSink::append(const MonitorEvent& e) {
  std::ostringstream detail;
  bool first = true;
  for (const auto& [k, v] : e.detail) {
    if (!first) detail << ',';
    first = false;
    detail << escape(k) << '=' << escape(v);
  }
  std::lock_guard lk(mu_);
  if (!f_) throw std::runtime_error("monitor sink closed");
  std::fprintf(f_, "%lld\t%llu\t%s\t%s\n", static_cast<long long>(e.timestamp_us),
               static_cast<unsigned long long>(e.task_id), MonitorEvent::kind_name(e.kind),
               detail.str().c_str());
}

void FileSink::flush() {
  std::lock_guard lk(mu_);
  if (f_) std::fflush(f_);
}

MonitorLog read_monitor_log(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot read monitor log: " + path);
  MonitorLog log;
  std::string line;
  bool first = true;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (first) {
      first = false;
      if (line.rfind("#parex-monitor", 0) != 0)
        throw std::runtime_error("monitor log missing header: " + path);
      for (const auto& field : split(line, '\t')) {
        auto eq = field.find('=');
        if (eq == std::string::npos) {
          if (field == "v1") log.header.version = 1;
          continue;
        }
        std::string k = field.substr(0, eq), v = field.substr(eq + 1);
        if (k == "run_id") log.header.run_id = v;
        if (k == "seed") log.header.seed = std::strtoull(v.c_str(), nullptr, 10);
        if (k == "epoch_us") log.header.epoch_wall_us = std::strtoll(v.c_str(), nullptr, 10);
      }
      continue;
    }
    auto cols = split(line, '\t');
    if (cols.size() != 4) throw std::runtime_error("torn monitor line: " + line);
    MonitorEvent e;
    e.timestamp_us = std::strtoll(cols[0].c_str(), nullptr, 10);
    e.task_id = std::strtoull(cols[1].c_str(), nullptr, 10);
    auto kind = MonitorEvent::kind_from_name(cols[2]);
    if (!kind) throw std::runtime_error("unknown event kind: " + cols[2]);
    e.kind = *kind;
    if (!cols[3].empty()) {
      for (const auto& pair : split(cols[3], ',')) {
        auto eq = pair.find('=');
        if (eq == std::string::npos) continue;
        e.detail[unescape(pair.substr(0, eq))] = unescape(pair.substr(eq + 1));
      }
    }
    log.events.push_back(std::move(e));
  }
  if (first) throw std::runtime_error("empty monitor log: " + path);
  return log;
}

std::map<std::uint64_t, std::vector<TaskState>> replay_task_histories(const MonitorLog& log) {
  std::map<std::uint64_t, std::vector<TaskState>> histories;
  std::map<std::uint64_t, std::int64_t> last_ts;
  for (const auto& e : log.events) {
    if (e.kind != MonitorEvent::Kind::StateChange) continue;
    auto to = e.detail.find("to");
    if (to == e.detail.end()) continue;
    TaskState s;
    bool found = false;
    for (int i = 0; i <= int(TaskState::Retrying); ++i) {
      if (to->second == task_state_name(TaskState(i))) {
        s = TaskState(i);
        found = true;
        break;
      }
    }
    if (!found) throw std::runtime_error("unknown state: " + to->second);
    auto& hist = histories[e.task_id];
    if (!hist.empty() && !task_transition_legal(hist.back(), s))
      throw std::runtime_error("illegal transition " +
                               std::string(task_state_name(hist.back())) + " -> " +
                               task_state_name(s) + " for task " +
                               std::to_string(e.task_id));
    if (last_ts.count(e.task_id) && e.timestamp_us < last_ts[e.task_id])
      throw std::runtime_error("events out of timestamp order for task " +
                               std::to_string(e.task_id));
    last_ts[e.task_id] = e.timestamp_us;
    hist.push_back(s);
  }
  for (const auto& [id, hist] : histories) {
    if (hist.empty() || !task_state_terminal(hist.back()))
      throw IncompleteLog("task " + std::to_string(id) + " has no terminal event");
  }
  return histories;
}

UtilizationReport compute_utilization(const MonitorLog& log) {
  UtilizationReport rep;

  std::int64_t first_launch = -1, last_complete = -1;
  for (const auto& e : log.events) {
    if (e.kind != MonitorEvent::Kind::StateChange) continue;
    auto to = e.detail.find("to");
    if (to == e.detail.end()) continue;
    if (to->second == task_state_name(TaskState::Launched)) {
      if (first_launch < 0 || e.timestamp_us < first_launch) first_launch = e.timestamp_us;
    }
    if (to->second == task_state_name(TaskState::Succeeded) ||
        to->second == task_state_name(TaskState::Failed)) {
      last_complete = std::max(last_complete, e.timestamp_us);
      auto s = e.detail.find("exec_start_us");
      auto t = e.detail.find("exec_end_us");
      if (s != e.detail.end() && t != e.detail.end()) {
        rep.busy_intervals.push_back(Interval{std::strtoll(s->second.c_str(), nullptr, 10),
                                              std::strtoll(t->second.c_str(), nullptr, 10)});
      }
    }
  }
  if (first_launch < 0 || last_complete < 0)
    throw IncompleteLog("log contains no completed tasks");
  const Interval window{first_launch, last_complete};
  rep.makespan_us = window.length();

  auto clip = [&window](Interval iv) {
    iv.start_us = std::max(iv.start_us, window.start_us);
    iv.end_us = std::min(iv.end_us, window.end_us);
    return iv;
  };

  for (const auto& iv : rep.busy_intervals) rep.busy_us += clip(iv).length();

  // Worker lifetime: each manager contributes `workers` workers between its
  // register and gone events (log end if it never deregisters).
  struct Live {
    std::int64_t start;
    int workers;
  };
  std::map<std::string, Live> live;
  for (const auto& e : log.events) {
    if (e.kind != MonitorEvent::Kind::ManagerEvent) continue;
    auto ev = e.detail.find("event");
    auto id = e.detail.find("manager_id");
    if (ev == e.detail.end() || id == e.detail.end()) continue;
    if (ev->second == "register") {
      int workers = 1;
      if (auto w = e.detail.find("workers"); w != e.detail.end())
        workers = std::atoi(w->second.c_str());
      live[id->second] = Live{e.timestamp_us, workers};
    } else if (ev->second == "gone") {
      auto it = live.find(id->second);
      if (it != live.end()) {
        rep.worker_lifetime_us +=
            clip(Interval{it->second.start, e.timestamp_us}).length() * it->second.workers;
        live.erase(it);
      }
    }
  }
  for (const auto& [_, l] : live)
    rep.worker_lifetime_us += clip(Interval{l.start, window.end_us}).length() * l.workers;

  if (rep.worker_lifetime_us > 0)
    rep.utilization = double(rep.busy_us) / double(rep.worker_lifetime_us);
  return rep;
}

}  // namespace parex
