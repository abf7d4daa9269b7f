// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/builtin_apps.hpp"

#include <fcntl.h>
#include <sys/file.h>
#include <unistd.h>

#include <cstdlib>
#include <fstream>
#include <sstream>
#include <thread>

#include "parex/app.hpp"
#include "parex/clock.hpp"
#include "parex/staging.hpp"

namespace parex {

namespace {

std::int64_t want_int(const ValueList& args, std::size_t i) {
  if (i >= args.size()) throw std::runtime_error("missing argument " + std::to_string(i));
  if (args[i].is<std::int64_t>()) return args[i].as_int();
  if (args[i].is<double>()) return static_cast<std::int64_t>(args[i].as_float());
  throw std::runtime_error("argument " + std::to_string(i) + " is not a number");
}

std::string want_str(const ValueList& args, std::size_t i) {
  if (i >= args.size()) throw std::runtime_error("missing argument " + std::to_string(i));
  if (!args[i].is<std::string>())
    throw std::runtime_error("argument " + std::to_string(i) + " is not a string");
  return args[i].as_string();
}

// Counts invocations in a file so the count survives retries landing on
// different worker processes. Returns the attempt number (1-based).
int bump_counter(const std::string& path) {
  int fd = ::open(path.c_str(), O_RDWR | O_CREAT, 0644);
  if (fd < 0) throw std::runtime_error("cannot open counter file " + path);
  ::flock(fd, LOCK_EX);
  char buf[32] = {0};
  ssize_t n = ::pread(fd, buf, sizeof(buf) - 1, 0);
  int count = n > 0 ? std::atoi(buf) : 0;
  ++count;
  std::string out = std::to_string(count);
  if (::ftruncate(fd, 0) != 0 || ::pwrite(fd, out.data(), out.size(), 0) < 0) {
    ::flock(fd, LOCK_UN);
    ::close(fd);
    throw std::runtime_error("cannot update counter file " + path);
  }
  ::flock(fd, LOCK_UN);
  ::close(fd);
  return count;
}

}  // namespace

void register_builtin_apps() {
  static bool done = false;
  if (done) return;
  done = true;
  auto& reg = AppRegistry::global();

  reg.register_fn("noop", "return 0", [](const ValueList&, const ValueMap&, const TaskContext&) {
    return Outcome::success(Value(std::int64_t(0)));
  });

  reg.register_fn("hello", "return 'Hello {}'.format(name)",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    return Outcome::success(Value("Hello " + want_str(args, 0)));
                  });

  reg.register_fn("add", "return a + b",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    return Outcome::success(Value(want_int(args, 0) + want_int(args, 1)));
                  });

  reg.register_fn("mul", "return a * b",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    return Outcome::success(Value(want_int(args, 0) * want_int(args, 1)));
                  });

  reg.register_fn("concat", "return ''.join(parts)",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    std::string out;
                    for (const auto& a : args)
                      out += a.is<std::string>() ? a.as_string() : a.repr();
                    return Outcome::success(Value(std::move(out)));
                  });

  reg.register_fn("sleep_ms", "sleep(ms); return ms",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    std::int64_t ms = want_int(args, 0);
                    std::this_thread::sleep_for(std::chrono::milliseconds(ms));
                    return Outcome::success(Value(ms));
                  });

  reg.register_fn("echo", "return x",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    if (args.empty()) return Outcome::success(Value(std::int64_t(0)));
                    return Outcome::success(args[0]);
                  });

  reg.register_fn("fail_always", "raise RuntimeError(msg)",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    std::string msg = args.empty() ? "failed" : args[0].as_string();
                    return Outcome::failure(ErrorKind::AppError, msg);
                  });

  // fail_n_times(counter_file, n [, payload]): fails on the first n calls.
  reg.register_fn("fail_n_times", "fail while file counter < n",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    std::string path = want_str(args, 0);
                    std::int64_t n = want_int(args, 1);
                    int count = bump_counter(path);
                    if (count <= n)
                      return Outcome::failure(ErrorKind::AppError,
                                              "induced failure " + std::to_string(count) +
                                                  "/" + std::to_string(n));
                    Value payload = args.size() > 2 ? args[2] : Value(std::int64_t(count));
                    return Outcome::success(payload);
                  });

  reg.register_fn("read_file", "return open(f).read()",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    std::string path;
                    if (!args.empty() && args[0].is<FileRef>()) {
                      const auto& r = args[0].as<FileRef>();
                      path = r.staged && !r.local_path.empty() ? r.local_path : r.uri;
                    } else {
                      path = want_str(args, 0);
                    }
                    std::ifstream in(path, std::ios::binary);
                    if (!in)
                      return Outcome::failure(ErrorKind::AppError, "cannot read " + path);
                    std::ostringstream ss;
                    ss << in.rdbuf();
                    return Outcome::success(Value(ss.str()));
                  });

  reg.register_fn("write_file", "open(f,'w').write(contents)",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    std::string path = want_str(args, 0);
                    std::ofstream out(path, std::ios::binary);
                    if (!out)
                      return Outcome::failure(ErrorKind::AppError, "cannot write " + path);
                    out << want_str(args, 1);
                    return Outcome::success(Value(FileRef::local(path)));
                  });

  reg.register_fn("env_var", "return os.environ.get(name, '')",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    const char* v = std::getenv(want_str(args, 0).c_str());
                    return Outcome::success(Value(std::string(v ? v : "")));
                  });

  register_staging_apps();
}

}  // namespace parex
