// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include <doctest.h>

#include <httplib.h>

#include <atomic>
#include <fstream>
#include <memory>
#include <thread>

#include "parex/builtin_apps.hpp"
#include "parex/data_manager.hpp"
#include "parex/digest.hpp"
#include "parex/local_executor.hpp"
#include "parex/staging.hpp"
#include "test_util.hpp"

using namespace parex;

namespace {

/// Loopback HTTP fixture server.
class FixtureServer {
 public:
  FixtureServer() {
    server_.Get("/data/(.*)", [this](const httplib::Request& req, httplib::Response& res) {
      ++hits_;
      auto it = files_.find(req.matches[1]);
      if (it == files_.end()) {
        res.status = 404;
        return;
      }
      res.set_content(it->second, "application/octet-stream");
    });
    server_.Get("/flaky/(.*)", [this](const httplib::Request& req, httplib::Response& res) {
      // First request per path dies mid-body (content provider aborts), the
      // next succeeds: a connection-level fault, not an HTTP error.
      std::string name = req.matches[1];
      if (flaky_seen_.insert(name).second) {
        res.set_content_provider(
            1 << 20, "application/octet-stream",
            [](std::size_t, std::size_t, httplib::DataSink&) { return false; });
        return;
      }
      auto it = files_.find(name);
      res.set_content(it == files_.end() ? std::string() : it->second,
                      "application/octet-stream");
    });
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FixtureServer() {
    server_.stop();
    thread_.join();
  }
  void add(const std::string& name, std::string content) {
    files_[name] = std::move(content);
  }
  std::string url(const std::string& path) {
    return "http://127.0.0.1:" + std::to_string(port_) + path;
  }
  int hits() const { return hits_.load(); }

 private:
  httplib::Server server_;
  std::map<std::string, std::string> files_;
  std::set<std::string> flaky_seen_;
  std::atomic<int> hits_{0};
  int port_ = 0;
  std::thread thread_;
};

struct EngineFixture {
  test::TempDir dir{"dm"};
  std::unique_ptr<Engine> engine;
  std::unique_ptr<DataManager> dm;

  explicit EngineFixture(int retries = 0) {
    register_builtin_apps();
    EngineConfig cfg;
    cfg.max_retries = retries;
    engine = std::make_unique<Engine>(std::move(cfg));
    engine->add_executor(std::make_shared<LocalExecutor>("local", 2, dir.file("sbx")));
    engine->start();
    dm = std::make_unique<DataManager>(*engine);
  }
};

std::string file_digest(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return sha256_hex(ss.str());
}

}  // namespace

TEST_CASE("existing local file passes through without a stage task") {
  EngineFixture fx;
  std::string path = fx.dir.file("present.txt");
  std::ofstream(path) << "here";
  auto r = fx.dm->resolve_files({Value(FileRef::local(path))}, {}, std::nullopt);
  CHECK(r.stage_tasks_inserted == 0);
  REQUIRE(r.args[0].is<FileRef>());
  CHECK(r.args[0].as<FileRef>().staged);
  CHECK(r.args[0].as<FileRef>().local_path == path);
}

TEST_CASE("http ref used by three apps inserts exactly one stage task") {
  FixtureServer srv;
  srv.add("shared.txt", "shared-bytes");
  EngineFixture fx;
  FileRef ref = FileRef::http(srv.url("/data/shared.txt"));

  std::vector<FutureHandle> futs;
  for (int i = 0; i < 3; ++i)
    futs.push_back(
        fx.dm->submit(AppRegistry::global().native("read_file"), {Value(ref)}));
  fx.engine->wait_all();
  for (auto& f : futs) {
    REQUIRE(f.result().ok);
    CHECK(f.result().value.as_string() == "shared-bytes");
  }
  CHECK(fx.dm->total_stage_tasks() == 1);
  CHECK(srv.hits() == 1);  // one transfer, three dependency edges
  // Each consumer depends on the stage task.
  for (auto& f : futs) {
    TaskRecord rec = fx.engine->task_snapshot(f.task_id());
    CHECK(rec.depends_on.size() == 1);
  }
}

TEST_CASE("staged copy is byte-identical, named by content address") {
  FixtureServer srv;
  std::string payload(1 << 20, '\0');
  for (std::size_t i = 0; i < payload.size(); ++i) payload[i] = char(i * 2654435761u >> 13);
  srv.add("big.bin", payload);
  EngineFixture fx;
  FileRef ref = FileRef::http(srv.url("/data/big.bin"));
  FutureHandle f =
      fx.dm->submit(AppRegistry::global().native("echo"), {Value(ref)});
  REQUIRE(f.result().ok);
  const FileRef& staged = f.result().value.as<FileRef>();
  REQUIRE(staged.staged);
  CHECK(file_digest(staged.local_path) == sha256_hex(payload));
  CHECK(staged.local_path.find(staged_file_name(ref.uri)) != std::string::npos);
}

TEST_CASE("zero-byte file stages to a zero-byte copy") {
  FixtureServer srv;
  srv.add("empty", "");
  EngineFixture fx;
  FutureHandle f = fx.dm->submit(AppRegistry::global().native("echo"),
                                 {Value(FileRef::http(srv.url("/data/empty")))});
  REQUIRE(f.result().ok);
  std::ifstream in(f.result().value.as<FileRef>().local_path, std::ios::binary);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  CHECK(ss.str().empty());
}

TEST_CASE("http 404 fails the stage task and dependents name the uri") {
  FixtureServer srv;
  EngineFixture fx;
  FileRef ref = FileRef::http(srv.url("/data/missing.txt"));
  FutureHandle f = fx.dm->submit(AppRegistry::global().native("read_file"), {Value(ref)});
  fx.engine->wait_all();
  REQUIRE_FALSE(f.result().ok);
  CHECK(f.result().error.kind == ErrorKind::DependencyError);
  // The stage task's own failure carries the uri.
  TaskRecord consumer = fx.engine->task_snapshot(f.task_id());
  REQUIRE(consumer.depends_on.size() == 1);
  TaskRecord stage = fx.engine->task_snapshot(*consumer.depends_on.begin());
  CHECK(stage.state == TaskState::Failed);
}

TEST_CASE("connection dropped once succeeds on retry") {
  FixtureServer srv;
  srv.add("flaky.txt", "finally");
  EngineFixture fx(/*retries=*/1);
  FileRef ref = FileRef::http(srv.url("/flaky/flaky.txt"));
  FutureHandle f = fx.dm->submit(AppRegistry::global().native("read_file"), {Value(ref)});
  REQUIRE(f.result().ok);
  CHECK(f.result().value.as_string() == "finally");
}

TEST_CASE("resolve_files is idempotent over its own output") {
  FixtureServer srv;
  srv.add("once.txt", "x");
  EngineFixture fx;
  FileRef ref = FileRef::http(srv.url("/data/once.txt"));
  auto first = fx.dm->resolve_files({Value(ref)}, {}, std::string("local"));
  CHECK(first.stage_tasks_inserted == 1);
  auto second = fx.dm->resolve_files(first.args, first.kwargs, std::string("local"));
  CHECK(second.stage_tasks_inserted == 0);
  CHECK(second.args == first.args);
  // Same uri again also hits the cache.
  auto third = fx.dm->resolve_files({Value(ref)}, {}, std::string("local"));
  CHECK(third.stage_tasks_inserted == 0);
  fx.engine->wait_all();
}

TEST_CASE("missing local file becomes a failing stage task, not a silent pass") {
  EngineFixture fx;
  FileRef ref = FileRef::local(fx.dir.file("nope.txt"));
  FutureHandle f = fx.dm->submit(AppRegistry::global().native("read_file"), {Value(ref)});
  fx.engine->wait_all();
  REQUIRE_FALSE(f.result().ok);
  CHECK(f.result().error.kind == ErrorKind::DependencyError);
}

TEST_CASE("file refs nested in containers are resolved too") {
  FixtureServer srv;
  srv.add("nested.txt", "deep");
  EngineFixture fx;
  FileRef ref = FileRef::http(srv.url("/data/nested.txt"));
  ValueList args{Value(ValueList{Value("pre"), Value(ref)})};
  auto r = fx.dm->resolve_files(args, {}, std::string("local"));
  CHECK(r.stage_tasks_inserted == 1);
  CHECK(r.args[0].as_list()[1].is<FutureRef>());
  fx.engine->wait_all();
}

TEST_CASE("shell pipeline consumes a declared output end to end") {
  EngineFixture fx;
  auto& reg = AppRegistry::global();
  std::string out_path = fx.dir.file("stage1.txt");
  AppSpec writer = shell_app("writer", "echo -n 'from stage one' > " + out_path);
  FutureHandle produced = fx.engine->submit(writer, {});
  FutureHandle output = fx.engine->declare_output(produced, FileRef::local(out_path));
  REQUIRE(output.result().ok);
  FutureHandle consumed =
      fx.dm->submit(reg.native("read_file"), {output.result().value});
  REQUIRE(consumed.result().ok);
  CHECK(consumed.result().value.as_string() == "from stage one");
}
