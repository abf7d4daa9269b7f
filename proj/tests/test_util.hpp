// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <unistd.h>

#include <atomic>
#include <filesystem>
#include <fstream>
#include <random>
#include <string>

#include "parex/value.hpp"

namespace parex::test {

/// Unique scratch directory, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& tag = "t") {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("parex-test-" + tag + "-" + std::to_string(::getpid()) + "-" +
             std::to_string(counter.fetch_add(1)));
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  std::string str() const { return path_.string(); }
  std::string file(const std::string& name) const { return (path_ / name).string(); }

 private:
  std::filesystem::path path_;
};

/// Random Value generator for round-trip property tests. Depth-bounded so
/// containers stay manageable.
inline Value random_value(std::mt19937_64& rng, int depth = 0) {
  std::uniform_int_distribution<int> pick(0, depth >= 3 ? 6 : 8);
  switch (pick(rng)) {
    case 0:
      return Value(std::int64_t(rng()));
    case 1: {
      std::uniform_real_distribution<double> d(-1e12, 1e12);
      return Value(d(rng));
    }
    case 2:
      return Value(bool(rng() & 1));
    case 3: {
      std::uniform_int_distribution<int> len(0, 24);
      std::string s;
      int n = len(rng);
      for (int i = 0; i < n; ++i) s.push_back(char('a' + rng() % 26));
      return Value(std::move(s));
    }
    case 4: {
      std::uniform_int_distribution<int> len(0, 64);
      std::string b;
      int n = len(rng);
      for (int i = 0; i < n; ++i) b.push_back(char(rng() & 0xff));
      return Value(Bytes{std::move(b)});
    }
    case 5: {
      FileRef r;
      r.scheme = (rng() & 1) ? FileRef::Scheme::Http : FileRef::Scheme::Local;
      r.uri = "u" + std::to_string(rng() % 1000);
      r.staged = rng() & 1;
      if (r.staged) r.local_path = "/tmp/" + r.uri;
      return Value(std::move(r));
    }
    case 6:
      return Value(UnixStatus{int(rng() % 256)});
    case 7: {
      std::uniform_int_distribution<int> len(0, 5);
      ValueList l;
      int n = len(rng);
      for (int i = 0; i < n; ++i) l.push_back(random_value(rng, depth + 1));
      return Value(std::move(l));
    }
    default: {
      std::uniform_int_distribution<int> len(0, 5);
      ValueMap m;
      int n = len(rng);
      for (int i = 0; i < n; ++i)
        m.emplace("k" + std::to_string(rng() % 100), random_value(rng, depth + 1));
      return Value(std::move(m));
    }
  }
}

inline std::string agent_path() {
#ifdef PAREX_AGENT_BIN
  return PAREX_AGENT_BIN;
#else
  return "parex-agent";
#endif
}

}  // namespace parex::test
