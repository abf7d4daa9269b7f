// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <fstream>
#include <sys/wait.h>

#include "parex/builtin_apps.hpp"
#include "parex/exec_kernel.hpp"
#include "parex/proc.hpp"
#include "test_util.hpp"

using namespace parex;

namespace {

std::string slurp(const std::string& path) {
  std::ifstream in(path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

TEST_CASE("command template rendering") {
  CHECK(render_command("echo 'Hello {0}'", {Value("World")}, {}) == "echo 'Hello World'");
  CHECK(render_command("{0} {1} {0}", {Value(1), Value("x")}, {}) == "1 x 1");
  ValueMap kw;
  kw["out"] = Value("/tmp/o");
  CHECK(render_command("cp {0} {out}", {Value("a")}, kw) == "cp a /tmp/o");
  CHECK(render_command("{{literal}}", {}, {}) == "{literal}");
  CHECK_THROWS_AS(render_command("{5}", {Value(1)}, {}), TemplateError);
  CHECK_THROWS_AS(render_command("{missing}", {}, {}), TemplateError);
  CHECK_THROWS_AS(render_command("{unclosed", {}, {}), TemplateError);
  // A staged file reference renders as its local path.
  FileRef r = FileRef::local("/data/in.txt");
  r.staged = true;
  CHECK(render_command("cat {0}", {Value(r)}, {}) == "cat /data/in.txt");
}

TEST_CASE("shell echo writes stdout file and returns status 0") {
  register_builtin_apps();
  test::TempDir dir("ek");
  ExecutionKernel kernel(AppRegistry::global(), dir.str());
  AppSpec app = shell_app("hello2", "echo 'Hello {0}'", dir.file("out.txt"));
  Outcome o = kernel.execute(app, {Value("World")}, {}, TaskContext{1, 0, "", ""});
  REQUIRE(o.ok);
  CHECK(o.value.as<UnixStatus>().code == 0);
  CHECK(slurp(dir.file("out.txt")) == "Hello World\n");
}

TEST_CASE("nonzero exit becomes an error carrying the status") {
  test::TempDir dir("ek");
  ExecutionKernel kernel(AppRegistry::global(), dir.str());
  AppSpec app = shell_app("fail7", "exit 7");
  Outcome o = kernel.execute(app, {}, {}, TaskContext{2, 0, "", ""});
  REQUIRE_FALSE(o.ok);
  CHECK(o.error.detail.at("unix_status") == "7");

  // Oracle: run the same command directly and compare the status.
  pid_t pid = spawn_process({"/bin/sh", "-c", "exit 7"});
  int st = wait_process(pid);
  CHECK(WEXITSTATUS(st) == 7);
}

TEST_CASE("each attempt gets its own sandbox directory") {
  test::TempDir dir("ek");
  ExecutionKernel kernel(AppRegistry::global(), dir.str());
  CHECK(kernel.sandbox_dir_for(5, 0) != kernel.sandbox_dir_for(5, 1));
  CHECK(kernel.sandbox_dir_for(5, 0) != kernel.sandbox_dir_for(6, 0));

  AppSpec app = shell_app("pwd", "pwd > where.txt");
  REQUIRE(kernel.execute(app, {}, {}, TaskContext{5, 0, "", ""}).ok);
  REQUIRE(kernel.execute(app, {}, {}, TaskContext{5, 1, "", ""}).ok);
  std::string a = slurp(kernel.sandbox_dir_for(5, 0) + "/where.txt");
  std::string b = slurp(kernel.sandbox_dir_for(5, 1) + "/where.txt");
  CHECK(a != b);
  CHECK(a.find("task_5_try_0") != std::string::npos);
}

TEST_CASE("native app errors pass through without retry at this layer") {
  register_builtin_apps();
  test::TempDir dir("ek");
  ExecutionKernel kernel(AppRegistry::global(), dir.str());
  Outcome o = kernel.execute(AppRegistry::global().native("fail_always"),
                             {Value("boom")}, {}, TaskContext{3, 0, "", ""});
  REQUIRE_FALSE(o.ok);
  CHECK(o.error.kind == ErrorKind::AppError);
  CHECK(o.error.message == "boom");
}

TEST_CASE("unknown app name is reported") {
  test::TempDir dir("ek");
  ExecutionKernel kernel(AppRegistry::global(), dir.str());
  AppSpec bogus;
  bogus.name = "no_such_app";
  Outcome o = kernel.execute(bogus, {}, {}, TaskContext{4, 0, "", ""});
  REQUIRE_FALSE(o.ok);
  CHECK(o.error.kind == ErrorKind::UnknownApp);
}

TEST_CASE("unbound template placeholder is an app error") {
  test::TempDir dir("ek");
  ExecutionKernel kernel(AppRegistry::global(), dir.str());
  AppSpec app = shell_app("bad", "echo {nope}");
  Outcome o = kernel.execute(app, {}, {}, TaskContext{6, 0, "", ""});
  REQUIRE_FALSE(o.ok);
  CHECK(o.error.message.find("template") != std::string::npos);
}

TEST_CASE("environment passes through to shell tasks") {
  test::TempDir dir("ek");
  ExecutionKernel kernel(AppRegistry::global(), dir.str());
  ::setenv("PAREX_TEST_ENV", "visible", 1);
  AppSpec app = shell_app("env", "echo -n $PAREX_TEST_ENV", dir.file("env.txt"));
  REQUIRE(kernel.execute(app, {}, {}, TaskContext{7, 0, "", ""}).ok);
  CHECK(slurp(dir.file("env.txt")) == "visible");
}
