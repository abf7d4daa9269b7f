// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/checkpoint.hpp"

#include <sys/stat.h>

#include "parex/codec.hpp"
#include "parex/digest.hpp"

namespace parex {

namespace {

std::string header_record() {
  ValueMap h;
  h["format"] = Value(std::int64_t(1));
  h["digest"] = Value(std::string(kDigestAlgorithm));
  return encode(Value(h));
}

void write_record(std::FILE* f, const std::string& body) {
  std::string frame;
  put_u32(frame, static_cast<std::uint32_t>(body.size()));
  frame += body;
  if (std::fwrite(frame.data(), 1, frame.size(), f) != frame.size())
    throw std::runtime_error("checkpoint write failed");
}

}  // namespace

CheckpointWriter::~CheckpointWriter() { close(); }

void CheckpointWriter::open(const std::string& path) {
  close();
  struct stat st;
  bool fresh = ::stat(path.c_str(), &st) != 0 || st.st_size == 0;
  f_ = std::fopen(path.c_str(), "ab");
  if (!f_) throw std::runtime_error("cannot open checkpoint file: " + path);
  path_ = path;
  if (fresh) {
    write_record(f_, header_record());
    std::fflush(f_);
  }
}

void CheckpointWriter::append(const std::string& digest, const Value& result,
                              std::int64_t timestamp_us) {
  if (!f_) return;
  ValueList rec;
  rec.emplace_back(digest);
  rec.emplace_back(result);
  rec.emplace_back(timestamp_us);
  write_record(f_, encode(Value(std::move(rec))));
  std::fflush(f_);
}

void CheckpointWriter::close() {
  if (f_) {
    std::fclose(f_);
    f_ = nullptr;
  }
}

std::size_t load_checkpoint_file(const std::string& path, MemoTable& table) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw CheckpointCorrupt("cannot open checkpoint file: " + path);
  std::string data;
  char buf[1 << 16];
  std::size_t n;
  while ((n = std::fread(buf, 1, sizeof(buf), f)) > 0) data.append(buf, n);
  std::fclose(f);

  std::size_t applied = 0;
  std::size_t off = 0;
  bool saw_header = false;
  while (off < data.size()) {
    if (off + 4 > data.size()) return applied;  // truncated length prefix: drop tail
    std::uint32_t len = get_u32(reinterpret_cast<const unsigned char*>(data.data()) + off);
    if (off + 4 + len > data.size()) return applied;  // truncated record: drop tail
    std::string body = data.substr(off + 4, len);
    Value v;
    try {
      v = decode(body);
    } catch (const DecodeError& e) {
      // A complete record that does not decode is corruption, not truncation.
      throw CheckpointCorrupt(path + ": record at offset " + std::to_string(off) + ": " +
                              e.what());
    }
    off += 4 + len;
    if (!saw_header) {
      saw_header = true;
      if (!v.is<ValueMap>() || !v.as_map().count("format"))
        throw CheckpointCorrupt(path + ": missing header record");
      continue;
    }
    if (!v.is<ValueList>() || v.as_list().size() != 3 || !v.as_list()[0].is<std::string>())
      throw CheckpointCorrupt(path + ": malformed record at offset " + std::to_string(off));
    table.store(v.as_list()[0].as_string(), v.as_list()[1]);
    ++applied;
  }
  return applied;
}

MemoTable load_checkpoints(const std::vector<std::string>& paths) {
  MemoTable table;
  for (const auto& p : paths) load_checkpoint_file(p, table);
  return table;
}

}  // namespace parex
