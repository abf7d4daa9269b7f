// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#include "parex/codec.hpp"

#include <cstring>
#include <limits>
#include <sstream>

namespace parex {

namespace {

enum Tag : unsigned char {
  kInt = 0x01,
  kFloat = 0x02,
  kBool = 0x03,
  kString = 0x04,
  kBytes = 0x05,
  kList = 0x06,
  kMap = 0x07,
  kFileRef = 0x08,
  kFutureRef = 0x09,
  kUnixStatus = 0x0A,
};

void emit(std::string& out, Tag tag, const std::string& payload) {
  if (payload.size() > std::numeric_limits<std::uint32_t>::max())
    throw EncodeError("payload too large");
  out.push_back(static_cast<char>(tag));
  put_u32(out, static_cast<std::uint32_t>(payload.size()));
  out += payload;
}

void encode_into(std::string& out, const Value& v);

std::string encode_payload(const Value& v) {
  std::string p;
  encode_into(p, v);
  return p;
}

void encode_into(std::string& out, const Value& v) {
  std::visit(
      [&out](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        std::string p;
        if constexpr (std::is_same_v<T, std::int64_t>) {
          put_u64(p, static_cast<std::uint64_t>(x));
          emit(out, kInt, p);
        } else if constexpr (std::is_same_v<T, double>) {
          std::uint64_t bits;
          static_assert(sizeof(bits) == sizeof(x));
          std::memcpy(&bits, &x, sizeof(bits));
          put_u64(p, bits);
          emit(out, kFloat, p);
        } else if constexpr (std::is_same_v<T, bool>) {
          p.push_back(x ? '\x01' : '\x00');
          emit(out, kBool, p);
        } else if constexpr (std::is_same_v<T, std::string>) {
          emit(out, kString, x);
        } else if constexpr (std::is_same_v<T, Bytes>) {
          emit(out, kBytes, x.data);
        } else if constexpr (std::is_same_v<T, ValueList>) {
          for (const Value& e : x) encode_into(p, e);
          emit(out, kList, p);
        } else if constexpr (std::is_same_v<T, ValueMap>) {
          for (const auto& [k, e] : x) {
            encode_into(p, Value(k));
            encode_into(p, e);
          }
          emit(out, kMap, p);
        } else if constexpr (std::is_same_v<T, FileRef>) {
          encode_into(p, Value(std::int64_t(x.scheme == FileRef::Scheme::Http ? 1 : 0)));
          encode_into(p, Value(x.uri));
          encode_into(p, Value(x.local_path));
          encode_into(p, Value(x.staged));
          emit(out, kFileRef, p);
        } else if constexpr (std::is_same_v<T, FutureRef>) {
          throw EncodeError("cannot encode unresolved FutureRef (task " +
                            std::to_string(x.task_id) + ")");
        } else if constexpr (std::is_same_v<T, UnixStatus>) {
          put_u64(p, static_cast<std::uint64_t>(static_cast<std::int64_t>(x.code)));
          emit(out, kUnixStatus, p);
        }
      },
      v.storage());
}

Value decode_at(const std::string& b, std::size_t& off);

Value decode_body(Tag tag, const std::string& b, std::size_t start, std::size_t len) {
  const unsigned char* p = reinterpret_cast<const unsigned char*>(b.data()) + start;
  switch (tag) {
    case kInt:
      if (len != 8) throw DecodeError("bad int width");
      return Value(static_cast<std::int64_t>(get_u64(p)));
    case kFloat: {
      if (len != 8) throw DecodeError("bad float width");
      std::uint64_t bits = get_u64(p);
      double d;
      std::memcpy(&d, &bits, sizeof(d));
      return Value(d);
    }
    case kBool:
      if (len != 1) throw DecodeError("bad bool width");
      if (p[0] > 1) throw DecodeError("bad bool value");
      return Value(p[0] == 1);
    case kString:
      return Value(b.substr(start, len));
    case kBytes:
      return Value(Bytes{b.substr(start, len)});
    case kList: {
      ValueList l;
      std::size_t off = start;
      while (off < start + len) l.push_back(decode_at(b, off));
      if (off != start + len) throw DecodeError("list payload overrun");
      return Value(std::move(l));
    }
    case kMap: {
      ValueMap m;
      std::size_t off = start;
      while (off < start + len) {
        Value k = decode_at(b, off);
        if (!k.is<std::string>()) throw DecodeError("map key must be string");
        if (off >= start + len) throw DecodeError("map missing value");
        Value val = decode_at(b, off);
        m.emplace(k.as_string(), std::move(val));
      }
      if (off != start + len) throw DecodeError("map payload overrun");
      return Value(std::move(m));
    }
    case kFileRef: {
      std::size_t off = start;
      Value scheme = decode_at(b, off);
      Value uri = decode_at(b, off);
      Value local = decode_at(b, off);
      Value staged = decode_at(b, off);
      if (off != start + len) throw DecodeError("fileref payload overrun");
      FileRef r;
      r.scheme = scheme.as_int() == 1 ? FileRef::Scheme::Http : FileRef::Scheme::Local;
      r.uri = uri.as_string();
      r.local_path = local.as_string();
      r.staged = staged.as_bool();
      return Value(std::move(r));
    }
    case kUnixStatus:
      if (len != 8) throw DecodeError("bad status width");
      return Value(UnixStatus{static_cast<int>(static_cast<std::int64_t>(get_u64(p)))});
    default:
      throw DecodeError("unknown type tag " + std::to_string(int(tag)));
  }
}

Value decode_at(const std::string& b, std::size_t& off) {
  if (off + 5 > b.size()) throw DecodeError("truncated header");
  Tag tag = static_cast<Tag>(static_cast<unsigned char>(b[off]));
  std::uint32_t len = get_u32(reinterpret_cast<const unsigned char*>(b.data()) + off + 1);
  off += 5;
  if (off + len > b.size()) throw DecodeError("truncated payload");
  Value v = decode_body(tag, b, off, len);
  off += len;
  return v;
}

}  // namespace

std::string encode(const Value& v) {
  std::string out;
  encode_into(out, v);
  return out;
}

Value decode(const std::string& bytes) {
  std::size_t off = 0;
  Value v = decode_at(bytes, off);
  if (off != bytes.size()) throw DecodeError("trailing garbage after value");
  return v;
}

Value decode_prefix(const std::string& bytes, std::size_t& offset) {
  return decode_at(bytes, offset);
}

void put_u32(std::string& out, std::uint32_t v) {
  out.push_back(static_cast<char>((v >> 24) & 0xff));
  out.push_back(static_cast<char>((v >> 16) & 0xff));
  out.push_back(static_cast<char>((v >> 8) & 0xff));
  out.push_back(static_cast<char>(v & 0xff));
}

std::uint32_t get_u32(const unsigned char* p) {
  return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
         (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

void put_u64(std::string& out, std::uint64_t v) {
  put_u32(out, static_cast<std::uint32_t>(v >> 32));
  put_u32(out, static_cast<std::uint32_t>(v & 0xffffffffu));
}

std::uint64_t get_u64(const unsigned char* p) {
  return (std::uint64_t(get_u32(p)) << 32) | get_u32(p + 4);
}

const char* error_kind_name(ErrorKind k) {
  switch (k) {
    case ErrorKind::AppError: return "AppError";
    case ErrorKind::DependencyError: return "DependencyError";
    case ErrorKind::ManagerLost: return "ManagerLost";
    case ErrorKind::UnknownApp: return "UnknownApp";
    case ErrorKind::UnknownExecutor: return "UnknownExecutor";
    case ErrorKind::Timeout: return "Timeout";
    case ErrorKind::TransferError: return "TransferError";
    case ErrorKind::OutputMissing: return "OutputMissing";
    case ErrorKind::Shutdown: return "Shutdown";
    case ErrorKind::Internal: return "Internal";
  }
  return "Internal";
}

ErrorKind error_kind_from_name(const std::string& name) {
  static const std::map<std::string, ErrorKind> table = {
      {"AppError", ErrorKind::AppError},
      {"DependencyError", ErrorKind::DependencyError},
      {"ManagerLost", ErrorKind::ManagerLost},
      {"UnknownApp", ErrorKind::UnknownApp},
      {"UnknownExecutor", ErrorKind::UnknownExecutor},
      {"Timeout", ErrorKind::Timeout},
      {"TransferError", ErrorKind::TransferError},
      {"OutputMissing", ErrorKind::OutputMissing},
      {"Shutdown", ErrorKind::Shutdown},
      {"Internal", ErrorKind::Internal},
  };
  auto it = table.find(name);
  return it == table.end() ? ErrorKind::Internal : it->second;
}

std::string ErrorInfo::to_string() const {
  std::ostringstream os;
  os << error_kind_name(kind) << ": " << message;
  for (const auto& [k, v] : detail) os << " [" << k << "=" << v << "]";
  return os.str();
}

std::string Value::repr() const {
  std::ostringstream os;
  std::visit(
      [&os](const auto& x) {
        using T = std::decay_t<decltype(x)>;
        if constexpr (std::is_same_v<T, std::int64_t>) {
          os << x;
        } else if constexpr (std::is_same_v<T, double>) {
          os << x;
        } else if constexpr (std::is_same_v<T, bool>) {
          os << (x ? "true" : "false");
        } else if constexpr (std::is_same_v<T, std::string>) {
          os << '"' << x << '"';
        } else if constexpr (std::is_same_v<T, Bytes>) {
          os << "bytes[" << x.data.size() << "]";
        } else if constexpr (std::is_same_v<T, ValueList>) {
          os << '[';
          bool first = true;
          for (const auto& e : x) {
            if (!first) os << ", ";
            first = false;
            os << e.repr();
          }
          os << ']';
        } else if constexpr (std::is_same_v<T, ValueMap>) {
          os << '{';
          bool first = true;
          for (const auto& [k, e] : x) {
            if (!first) os << ", ";
            first = false;
            os << k << ": " << e.repr();
          }
          os << '}';
        } else if constexpr (std::is_same_v<T, FileRef>) {
          os << "file(" << x.uri << (x.staged ? ", staged@" + x.local_path : "") << ")";
        } else if constexpr (std::is_same_v<T, FutureRef>) {
          os << "future(" << x.task_id << ")";
        } else if constexpr (std::is_same_v<T, UnixStatus>) {
          os << "exit(" << x.code << ")";
        }
      },
      storage());
  return os.str();
}

}  // namespace parex
