// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

#include "parex/value.hpp"

namespace parex {

struct EncodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct DecodeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Wire layout: one type-tag byte, then a 4-byte big-endian payload length,
// then the payload. Containers hold concatenated child encodings. Map keys
// are stored in sorted order, so encodings are canonical: equal values
// produce identical bytes on every platform and run.
//
// This is also the payload format of executor wire frames and checkpoint
// records.

/// Serialize a value. Throws EncodeError if the value embeds a FutureRef
/// (unresolved futures never ship).
std::string encode(const Value& v);

/// Parse one encoded value; the buffer must contain exactly one value.
/// Throws DecodeError on anything malformed.
Value decode(const std::string& bytes);

/// Parse one value starting at `offset`; advances `offset` past it.
Value decode_prefix(const std::string& bytes, std::size_t& offset);

// Big-endian integer helpers shared by framing and checkpoint code.
void put_u32(std::string& out, std::uint32_t v);
std::uint32_t get_u32(const unsigned char* p);
void put_u64(std::string& out, std::uint64_t v);
std::uint64_t get_u64(const unsigned char* p);

}  // namespace parex
