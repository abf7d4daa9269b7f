// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <chrono>
#include <cstdint>

namespace parex {

/// Monotonic microseconds, system-wide base (CLOCK_MONOTONIC), so timestamps
/// taken in different processes on the same host are comparable.
std::int64_t monotonic_us();

/// Wall-clock microseconds since the UNIX epoch.
std::int64_t wall_us();

void sleep_ms(int ms);

}  // namespace parex
