// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>

#include "parex/value.hpp"

namespace parex {

// Transfer tasks are ordinary tasks: these apps run on workers like any
// other, so a staged file lands on the resource that will consume it.
inline constexpr const char* kStageHttpApp = "__stage_http";
inline constexpr const char* kStageLocalApp = "__stage_local";

/// Registers the staging apps (called from register_builtin_apps()).
void register_staging_apps();

/// Destination filename for a staged copy: <sha-prefix-16>_<basename>.
std::string staged_file_name(const std::string& uri);

/// Synchronous HTTP GET of `ref.uri` into dest_dir; returns the staged ref.
/// Verifies the byte count against Content-Length when the server sends one.
/// Throws std::runtime_error on connection failure or status >= 400.
FileRef stage_http_fetch(const FileRef& ref, const std::string& dest_dir);

}  // namespace parex
