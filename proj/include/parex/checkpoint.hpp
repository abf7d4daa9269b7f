// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <vector>

#include "parex/memo.hpp"

namespace parex {

struct CheckpointCorrupt : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Append-only persistent image of the memo table.
///
/// File layout: a sequence of records, each a 4-byte big-endian length
/// followed by a codec-encoded value. The first record is a header map
/// {"format": 1, "digest": "sha256"}; every later record is the list
/// [digest-string, result Value, timestamp-us]. Later records for the same
/// digest supersede earlier ones on load.
class CheckpointWriter {
 public:
  CheckpointWriter() = default;
  ~CheckpointWriter();
  CheckpointWriter(const CheckpointWriter&) = delete;
  CheckpointWriter& operator=(const CheckpointWriter&) = delete;

  /// Opens (creating or appending) and writes the header if the file is new.
  void open(const std::string& path);
  bool is_open() const { return f_ != nullptr; }
  const std::string& path() const { return path_; }

  /// Appends one record and flushes, so a completed task survives a crash.
  void append(const std::string& digest, const Value& result, std::int64_t timestamp_us);

  void close();

 private:
  std::FILE* f_ = nullptr;
  std::string path_;
};

/// Replays checkpoint files into a memo table. Later files win on key
/// conflicts. A truncated trailing record is tolerated and dropped; malformed
/// bytes anywhere earlier raise CheckpointCorrupt.
MemoTable load_checkpoints(const std::vector<std::string>& paths);

/// Loads a single file into `table`; returns records applied.
std::size_t load_checkpoint_file(const std::string& path, MemoTable& table);

}  // namespace parex
