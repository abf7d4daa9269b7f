// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/staging.hpp"

#include <filesystem>
#include <fstream>

#include <httplib.h>

#include "parex/app.hpp"
#include "parex/digest.hpp"

namespace parex {

namespace {

struct ParsedUrl {
  std::string host_port;  // scheme://host:port
  std::string path;
};

ParsedUrl parse_http_url(const std::string& uri) {
  auto scheme_end = uri.find("://");
  if (scheme_end == std::string::npos) throw std::runtime_error("not a URL: " + uri);
  auto path_start = uri.find('/', scheme_end + 3);
  ParsedUrl p;
  if (path_start == std::string::npos) {
    p.host_port = uri;
    p.path = "/";
  } else {
    p.host_port = uri.substr(0, path_start);
    p.path = uri.substr(path_start);
  }
  return p;
}

}  // namespace

std::string staged_file_name(const std::string& uri) {
  std::string base = uri;
  auto slash = base.find_last_of('/');
  if (slash != std::string::npos) base = base.substr(slash + 1);
  if (base.empty()) base = "file";
  return sha256_hex(uri).substr(0, 16) + "_" + base;
}

FileRef stage_http_fetch(const FileRef& ref, const std::string& dest_dir) {
  ParsedUrl url = parse_http_url(ref.uri);
  httplib::Client client(url.host_port);
  client.set_connection_timeout(5, 0);
  client.set_read_timeout(30, 0);

  std::error_code ec;
  std::filesystem::create_directories(dest_dir, ec);
  std::string dest = dest_dir + "/" + staged_file_name(ref.uri);

  auto res = client.Get(url.path);
  if (!res)
    throw std::runtime_error("connection failed for " + ref.uri + " (" +
                             httplib::to_string(res.error()) + ")");
  if (res->status >= 400)
    throw std::runtime_error("HTTP " + std::to_string(res->status) + " for " + ref.uri);
  if (res->has_header("Content-Length")) {
    auto want = std::stoull(res->get_header_value("Content-Length"));
    if (want != res->body.size())
      throw std::runtime_error("short read for " + ref.uri + ": got " +
                               std::to_string(res->body.size()) + " of " +
                               std::to_string(want) + " bytes");
  }
  std::ofstream out(dest, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write staged file " + dest);
  out.write(res->body.data(), static_cast<std::streamsize>(res->body.size()));
  out.close();

  FileRef staged = ref;
  staged.local_path = dest;
  staged.staged = true;
  return staged;
}

void register_staging_apps() {
  auto& reg = AppRegistry::global();

  reg.register_fn(kStageHttpApp, "download uri to staging dir",
                  [](const ValueList& args, const ValueMap&, const TaskContext& ctx) {
                    if (args.empty() || !args[0].is<FileRef>())
                      return Outcome::failure(ErrorKind::TransferError,
                                              "stage task needs a FileRef argument");
                    const auto& ref = args[0].as<FileRef>();
                    std::string dest = ctx.staging_dir.empty() ? "." : ctx.staging_dir;
                    try {
                      FileRef staged = stage_http_fetch(ref, dest);
                      return Outcome::success(Value(std::move(staged)));
                    } catch (const std::exception& e) {
                      ErrorInfo err{ErrorKind::TransferError, e.what()};
                      err.detail["uri"] = ref.uri;
                      return Outcome::failure(std::move(err));
                    }
                  });

  reg.register_fn(kStageLocalApp, "verify local file exists",
                  [](const ValueList& args, const ValueMap&, const TaskContext&) {
                    if (args.empty() || !args[0].is<FileRef>())
                      return Outcome::failure(ErrorKind::TransferError,
                                              "stage task needs a FileRef argument");
                    FileRef ref = args[0].as<FileRef>();
                    if (!std::filesystem::exists(ref.uri)) {
                      ErrorInfo err{ErrorKind::TransferError,
                                    "local file not found: " + ref.uri};
                      err.detail["uri"] = ref.uri;
                      return Outcome::failure(std::move(err));
                    }
                    ref.local_path = ref.uri;
                    ref.staged = true;
                    return Outcome::success(Value(std::move(ref)));
                  });
}

}  // namespace parex
