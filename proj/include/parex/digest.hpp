// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

namespace parex {

// Memo keys and checkpoint records use a single fixed 256-bit hash; the
// algorithm name is written into checkpoint headers so files stay
// self-describing.
inline constexpr const char* kDigestAlgorithm = "sha256";

/// Hex-encoded SHA-256 of `data`.
std::string sha256_hex(const std::string& data);

std::string to_hex(const std::string& raw);

}  // namespace parex
