// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "parex/executor.hpp"
#include "parex/value.hpp"

namespace parex {

// Frame "type" values shared by the executors' wire protocols.
namespace wire {
inline constexpr const char* kRegister = "REGISTER";
inline constexpr const char* kHeartbeat = "HEARTBEAT";
inline constexpr const char* kTaskBatch = "TASK_BATCH";
inline constexpr const char* kResultBatch = "RESULT_BATCH";
inline constexpr const char* kCmd = "CMD";
inline constexpr const char* kCmdReply = "CMD_REPLY";
inline constexpr const char* kManagerLost = "MANAGER_LOST";
inline constexpr const char* kManagerEvent = "MANAGER_EVENT";
inline constexpr const char* kShutdown = "SHUTDOWN";
inline constexpr const char* kTask = "TASK";
inline constexpr const char* kResult = "RESULT";
}  // namespace wire

ValueMap envelope_to_map(const TaskEnvelope& env);
TaskEnvelope envelope_from_map(const ValueMap& m);

ValueMap outcome_to_map(const Outcome& o);
Outcome outcome_from_map(const ValueMap& m);

/// Result entry carried inside RESULT/RESULT_BATCH frames.
ValueMap completion_to_map(const CompletionInfo& info);
CompletionInfo completion_from_map(const ValueMap& m);

// Typed field accessors with defaults; wire maps are forgiving on optionals.
std::int64_t map_int(const ValueMap& m, const std::string& key, std::int64_t dflt = 0);
std::string map_str(const ValueMap& m, const std::string& key,
                    const std::string& dflt = "");
bool map_bool(const ValueMap& m, const std::string& key, bool dflt = false);

}  // namespace parex
