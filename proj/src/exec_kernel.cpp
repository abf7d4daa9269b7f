// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/exec_kernel.hpp"

#include <sys/stat.h>
#include <sys/wait.h>

#include <cerrno>
#include <cstring>
#include <filesystem>
#include <sstream>

#include "parex/proc.hpp"

namespace parex {

namespace {

std::string shell_render(const Value& v) {
  return std::visit(
      [](const auto& x) -> std::string {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int64_t>) {
          return std::to_string(x);
        } else if constexpr (std::is_same_v<T, double>) {
          std::ostringstream os;
          os << x;
          return os.str();
        } else if constexpr (std::is_same_v<T, bool>) {
          return x ? "true" : "false";
        } else if constexpr (std::is_same_v<T, std::string>) {
          return x;
        } else if constexpr (std::is_same_v<T, FileRef>) {
          return x.staged && !x.local_path.empty() ? x.local_path : x.uri;
        } else if constexpr (std::is_same_v<T, UnixStatus>) {
          return std::to_string(x.code);
        } else {
          return Value(x).repr();
        }
      },
      v.storage());
}

}  // namespace

std::string render_command(const std::string& tmpl, const ValueList& args,
                           const ValueMap& kwargs) {
  std::string out;
  out.reserve(tmpl.size());
  for (std::size_t i = 0; i < tmpl.size(); ++i) {
    char c = tmpl[i];
    if (c == '{') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '{') {
        out.push_back('{');
        ++i;
        continue;
      }
      auto close = tmpl.find('}', i + 1);
      if (close == std::string::npos) throw TemplateError("unterminated placeholder");
      std::string key = tmpl.substr(i + 1, close - i - 1);
      i = close;
      if (key.empty()) throw TemplateError("empty placeholder");
      if (std::isdigit(static_cast<unsigned char>(key[0]))) {
        std::size_t idx = std::stoul(key);
        if (idx >= args.size())
          throw TemplateError("positional placeholder {" + key + "} out of range");
        out += shell_render(args[idx]);
      } else {
        auto it = kwargs.find(key);
        if (it == kwargs.end()) throw TemplateError("unbound placeholder {" + key + "}");
        out += shell_render(it->second);
      }
    } else if (c == '}') {
      if (i + 1 < tmpl.size() && tmpl[i + 1] == '}') {
        out.push_back('}');
        ++i;
        continue;
      }
      throw TemplateError("stray '}' in template");
    } else {
      out.push_back(c);
    }
  }
  return out;
}

ExecutionKernel::ExecutionKernel(const AppRegistry& registry, std::string sandbox_root)
    : registry_(registry), sandbox_root_(std::move(sandbox_root)) {
  std::error_code ec;
  std::filesystem::create_directories(sandbox_root_, ec);
}

std::string ExecutionKernel::sandbox_dir_for(std::uint64_t task_id, int attempt) const {
  return sandbox_root_ + "/task_" + std::to_string(task_id) + "_try_" +
         std::to_string(attempt);
}

Outcome ExecutionKernel::execute(const AppSpec& app, const ValueList& args,
                                 const ValueMap& kwargs, const TaskContext& ctx) const {
  TaskContext c = ctx;
  if (c.staging_dir.empty()) c.staging_dir = sandbox_root_ + "/_staging";
  try {
    if (app.kind == AppSpec::Kind::NativeFunction)
      return run_native(app, args, kwargs, c);
    return run_shell(app, args, kwargs, c);
  } catch (const std::exception& e) {
    return Outcome::failure(ErrorKind::Internal, e.what());
  }
}

Outcome ExecutionKernel::run_native(const AppSpec& app, const ValueList& args,
                                    const ValueMap& kwargs, const TaskContext& ctx) const {
  const NativeFn* fn = registry_.find(app.name);
  if (!fn)
    return Outcome::failure(ErrorKind::UnknownApp,
                            "app '" + app.name + "' not in worker registry");
  try {
    return (*fn)(args, kwargs, ctx);
  } catch (const std::exception& e) {
    return Outcome::failure(ErrorKind::AppError, e.what());
  }
}

Outcome ExecutionKernel::run_shell(const AppSpec& app, const ValueList& args,
                                   const ValueMap& kwargs, TaskContext ctx) const {
  std::string cmd;
  try {
    cmd = render_command(app.command_template, args, kwargs);
  } catch (const TemplateError& e) {
    return Outcome::failure(ErrorKind::AppError, std::string("template: ") + e.what());
  }

  ctx.sandbox_dir = sandbox_dir_for(ctx.task_id, ctx.attempt);
  std::error_code ec;
  std::filesystem::create_directories(ctx.sandbox_dir, ec);
  if (ec)
    return Outcome::failure(ErrorKind::Internal,
                            "sandbox: cannot create " + ctx.sandbox_dir + ": " + ec.message());

  auto resolve = [&ctx](const std::string& p) {
    if (p.empty() || p[0] == '/') return p;
    return ctx.sandbox_dir + "/" + p;
  };

  SpawnOptions opts;
  opts.cwd = ctx.sandbox_dir;
  opts.stdout_path = resolve(app.stdout_path);
  opts.stderr_path = resolve(app.stderr_path);
  pid_t pid;
  try {
    pid = spawn_process({"/bin/sh", "-c", cmd}, opts);
  } catch (const SpawnError& e) {
    return Outcome::failure(ErrorKind::Internal, e.what());
  }
  int status = wait_process(pid);
  int code = WIFEXITED(status) ? WEXITSTATUS(status)
                               : 128 + (WIFSIGNALED(status) ? WTERMSIG(status) : 0);
  if (code == 0) return Outcome::success(Value(UnixStatus{0}));

  ErrorInfo err{ErrorKind::AppError, "shell command exited with status " + std::to_string(code)};
  err.detail["unix_status"] = std::to_string(code);
  if (!opts.stderr_path.empty()) err.detail["stderr_path"] = opts.stderr_path;
  err.detail["command"] = cmd;
  return Outcome::failure(std::move(err));
}

}  // namespace parex
