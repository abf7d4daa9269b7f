// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

// parex-agent: the process zoo behind the distributed executors. The CLI and
// providers spawn these; nobody runs them by hand except when debugging.

#include <CLI11.hpp>

#include <cstdlib>
#include <string>

#include "parex/builtin_apps.hpp"
#include "parex/htex_agent.hpp"
#include "parex/llex_agent.hpp"

namespace {

bool split_host_port(const std::string& s, std::string& host, std::uint16_t& port) {
  auto colon = s.find_last_of(':');
  if (colon == std::string::npos) return false;
  host = s.substr(0, colon);
  port = static_cast<std::uint16_t>(std::stoi(s.substr(colon + 1)));
  return true;
}

}  // namespace

int main(int argc, char** argv) {
  parex::register_builtin_apps();

  CLI::App app{"parex agent processes (interchange, manager, worker, llex relay/worker)"};
  app.require_subcommand(1);

  // interchange
  auto* ix = app.add_subcommand("interchange", "run the htex interchange broker");
  parex::InterchangeConfig ixc;
  ix->add_option("--task-port", ixc.task_port);
  ix->add_option("--cmd-port", ixc.cmd_port);
  ix->add_option("--hb-period", ixc.heartbeat_period_ms);
  ix->add_option("--hb-threshold", ixc.heartbeat_threshold_ms);
  ix->add_option("--batch-max", ixc.batch_size_max);
  ix->add_option("--seed", ixc.seed);

  // manager
  auto* mgr = app.add_subcommand("manager", "run one htex per-node manager");
  parex::ManagerAgentConfig mc;
  std::string ix_addr;
  mgr->add_option("--interchange", ix_addr)->required();
  mgr->add_option("--workers", mc.workers);
  mgr->add_option("--prefetch", mc.prefetch);
  mgr->add_option("--hb-period", mc.heartbeat_period_ms);
  mgr->add_option("--hb-threshold", mc.heartbeat_threshold_ms);
  mgr->add_option("--sandbox", mc.sandbox_root);
  mgr->add_option("--manager-id", mc.manager_id);

  // worker (htex; spawned by a manager with an inherited socketpair fd)
  auto* wk = app.add_subcommand("worker", "run one htex worker (manager child)");
  int wk_fd = -1, wk_index = 0;
  std::string wk_sandbox = "/tmp/parex-sandbox";
  wk->add_option("--fd", wk_fd)->required();
  wk->add_option("--index", wk_index);
  wk->add_option("--sandbox", wk_sandbox);

  // llex relay
  auto* relay = app.add_subcommand("llex-relay", "run the low-latency relay");
  parex::RelayConfig rc;
  relay->add_option("--client-port", rc.client_port);
  relay->add_option("--worker-port", rc.worker_port);

  // llex worker
  auto* lw = app.add_subcommand("llex-worker", "run one llex worker");
  parex::LlexWorkerConfig lwc;
  std::string relay_addr;
  lw->add_option("--relay", relay_addr)->required();
  lw->add_option("--sandbox", lwc.sandbox_root);
  lw->add_option("--index", lwc.index);
  lw->add_flag("--drop", lwc.drop_frames, "swallow every task frame (fault injection)");

  CLI11_PARSE(app, argc, argv);

  if (*ix) return parex::run_interchange(ixc);
  if (*mgr) {
    if (!split_host_port(ix_addr, mc.interchange_host, mc.interchange_port)) {
      std::fprintf(stderr, "bad --interchange address '%s'\n", ix_addr.c_str());
      return 64;
    }
    return parex::run_manager(mc);
  }
  if (*wk) return parex::run_worker(wk_fd, wk_index, wk_sandbox);
  if (*relay) return parex::run_llex_relay(rc);
  if (*lw) {
    if (!split_host_port(relay_addr, lwc.relay_host, lwc.relay_port)) {
      std::fprintf(stderr, "bad --relay address '%s'\n", relay_addr.c_str());
      return 64;
    }
    return parex::run_llex_worker(lwc);
  }
  return 64;
}
