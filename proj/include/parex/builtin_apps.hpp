// Copyright (c) 2026 the parex authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

namespace parex {

/// Registers the stock app set in the global registry. Both the CLI process
/// and every worker agent call this at startup, so a task shipped by name
/// resolves wherever it lands. Idempotent.
///
/// Apps: noop, hello, add, mul, concat, sleep_ms, echo, fail_always,
/// fail_n_times (file-backed counter, so retries on other workers still see
/// prior attempts), read_file, write_file, env_var, and the staging helpers
/// used by the data manager.
void register_builtin_apps();

}  // namespace parex
