// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/proc.hpp"

#include <fcntl.h>
#include <signal.h>
#include <sys/prctl.h>
#include <sys/wait.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>
#include <stdexcept>

#include "parex/clock.hpp"

namespace parex {

pid_t spawn_process(const std::vector<std::string>& argv, const SpawnOptions& opts) {
  if (argv.empty()) throw SpawnError("empty argv");

  std::vector<char*> cargv;
  cargv.reserve(argv.size() + 1);
  for (const auto& a : argv) cargv.push_back(const_cast<char*>(a.c_str()));
  cargv.push_back(nullptr);

  pid_t pid = ::fork();
  if (pid < 0) throw SpawnError(std::string("fork: ") + std::strerror(errno));
  if (pid == 0) {
    if (opts.kill_on_parent_death) {
      ::prctl(PR_SET_PDEATHSIG, SIGKILL);
      if (::getppid() == 1) ::_exit(127);  // parent already gone
    }
    if (!opts.cwd.empty() && ::chdir(opts.cwd.c_str()) != 0) ::_exit(126);
    for (const auto& [k, v] : opts.env) ::setenv(k.c_str(), v.c_str(), 1);
    auto redirect = [](const std::string& path, int target) {
      if (path.empty()) return true;
      int fd = ::open(path.c_str(), O_WRONLY | O_CREAT | O_TRUNC, 0644);
      if (fd < 0) return false;
      ::dup2(fd, target);
      ::close(fd);
      return true;
    };
    if (opts.stdout_pipe_fd >= 0) {
      ::dup2(opts.stdout_pipe_fd, STDOUT_FILENO);
      ::close(opts.stdout_pipe_fd);
    } else if (!redirect(opts.stdout_path, STDOUT_FILENO)) {
      ::_exit(126);
    }
    if (!redirect(opts.stderr_path, STDERR_FILENO)) ::_exit(126);
    if (opts.pass_fd >= 0) {
      int flags = ::fcntl(opts.pass_fd, F_GETFD);
      ::fcntl(opts.pass_fd, F_SETFD, flags & ~FD_CLOEXEC);
    }
    ::execvp(cargv[0], cargv.data());
    ::_exit(127);
  }
  return pid;
}

bool process_alive(pid_t pid) {
  if (pid <= 0) return false;
  if (auto st = try_wait_process(pid)) {
    (void)st;
    return false;
  }
  return ::kill(pid, 0) == 0;
}

int wait_process(pid_t pid) {
  int status = 0;
  while (::waitpid(pid, &status, 0) < 0) {
    if (errno != EINTR) return -1;
  }
  return status;
}

std::optional<int> try_wait_process(pid_t pid) {
  int status = 0;
  pid_t r = ::waitpid(pid, &status, WNOHANG);
  if (r == pid) return status;
  return std::nullopt;
}

void terminate_process(pid_t pid, int grace_ms) {
  if (pid <= 0) return;
  if (try_wait_process(pid)) return;
  ::kill(pid, SIGTERM);
  std::int64_t deadline = monotonic_us() + std::int64_t(grace_ms) * 1000;
  while (monotonic_us() < deadline) {
    if (try_wait_process(pid)) return;
    sleep_ms(5);
  }
  ::kill(pid, SIGKILL);
  wait_process(pid);
}

std::string self_exe_path() {
  char buf[4096];
  ssize_t n = ::readlink("/proc/self/exe", buf, sizeof(buf) - 1);
  if (n <= 0) return {};
  buf[n] = '\0';
  return std::string(buf);
}

}  // namespace parex
