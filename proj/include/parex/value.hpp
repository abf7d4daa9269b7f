// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <memory>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace parex {

/// A file reference that apps exchange instead of raw paths. `uri` names the
/// source; `local_path` is filled once the file has been staged onto the
/// execution resource. Apps must treat referenced files as read-only.
struct FileRef {
  enum class Scheme { Local, Http };

  Scheme scheme = Scheme::Local;
  std::string uri;
  std::string local_path;  // empty until staged (Local refs start staged)
  bool staged = false;

  static FileRef local(std::string path) {
    FileRef r;
    r.scheme = Scheme::Local;
    r.uri = std::move(path);
    r.local_path = r.uri;
    return r;
  }
  static FileRef http(std::string url) {
    FileRef r;
    r.scheme = Scheme::Http;
    r.uri = std::move(url);
    return r;
  }

  bool operator==(const FileRef&) const = default;
};

/// Placeholder for the eventual result of another task. Appears only in
/// argument lists before dispatch; the kernel substitutes the concrete value
/// before anything is shipped to a worker.
struct FutureRef {
  std::uint64_t task_id = 0;
  bool operator==(const FutureRef&) const = default;
};

/// Return value of a shell task: the process exit status.
struct UnixStatus {
  int code = 0;
  bool operator==(const UnixStatus&) const = default;
};

/// Distinct from String so that binary payloads round-trip unambiguously.
struct Bytes {
  std::string data;
  bool operator==(const Bytes&) const = default;
};

class Value;
using ValueList = std::vector<Value>;
// std::map keeps keys ordered, which makes every encoding canonical.
using ValueMap = std::map<std::string, Value>;

/// Immutable-by-convention tagged union covering everything that may cross
/// the wire: scalars, containers, file references, future placeholders, and
/// shell exit statuses.
class Value {
 public:
  using Storage = std::variant<std::int64_t, double, bool, std::string, Bytes,
                               ValueList, ValueMap, FileRef, FutureRef, UnixStatus>;

  Value() : v_(std::int64_t{0}) {}
  Value(std::int64_t i) : v_(i) {}
  Value(int i) : v_(static_cast<std::int64_t>(i)) {}
  Value(double d) : v_(d) {}
  Value(bool b) : v_(b) {}
  Value(const char* s) : v_(std::string(s)) {}
  Value(std::string s) : v_(std::move(s)) {}
  Value(Bytes b) : v_(std::move(b)) {}
  Value(ValueList l) : v_(std::move(l)) {}
  Value(ValueMap m) : v_(std::move(m)) {}
  Value(FileRef f) : v_(std::move(f)) {}
  Value(FutureRef f) : v_(f) {}
  Value(UnixStatus s) : v_(s) {}

  template <typename T>
  bool is() const {
    return std::holds_alternative<T>(v_);
  }
  template <typename T>
  const T& as() const {
    return std::get<T>(v_);
  }

  const Storage& storage() const { return v_; }

  std::int64_t as_int() const { return std::get<std::int64_t>(v_); }
  double as_float() const { return std::get<double>(v_); }
  bool as_bool() const { return std::get<bool>(v_); }
  const std::string& as_string() const { return std::get<std::string>(v_); }
  const ValueList& as_list() const { return std::get<ValueList>(v_); }
  const ValueMap& as_map() const { return std::get<ValueMap>(v_); }

  bool operator==(const Value& o) const { return v_ == o.v_; }

  /// Human-readable rendering for logs and CLI output.
  std::string repr() const;

 private:
  Storage v_;
};

/// Kinds of failures a task outcome can carry. Stringly-typed detail lives in
/// ErrorInfo::detail.
enum class ErrorKind {
  AppError,         // app raised / nonzero shell status
  DependencyError,  // an upstream task failed
  ManagerLost,      // executor lost the node holding the task
  UnknownApp,
  UnknownExecutor,
  Timeout,
  TransferError,
  OutputMissing,
  Shutdown,
  Internal,
};

const char* error_kind_name(ErrorKind k);
ErrorKind error_kind_from_name(const std::string& name);

struct ErrorInfo {
  ErrorKind kind = ErrorKind::AppError;
  std::string message;
  std::map<std::string, std::string> detail;  // e.g. root_task, unix_status, uri

  std::string to_string() const;
};

/// Result of one task attempt: a Value on success, an ErrorInfo otherwise.
struct Outcome {
  bool ok = false;
  Value value;
  ErrorInfo error;

  static Outcome success(Value v) {
    Outcome o;
    o.ok = true;
    o.value = std::move(v);
    return o;
  }
  static Outcome failure(ErrorInfo e) {
    Outcome o;
    o.ok = false;
    o.error = std::move(e);
    return o;
  }
  static Outcome failure(ErrorKind k, std::string msg) {
    return failure(ErrorInfo{k, std::move(msg), {}});
  }
};

}  // namespace parex
