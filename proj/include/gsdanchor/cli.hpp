// Copyright 2026 The gsdanchor Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <iosfwd>
#include <string>
#include <vector>

namespace gsdanchor {

/// Exit codes of the command-line front end.
inline constexpr int kExitOk = 0;
inline constexpr int kExitFailure = 1;
inline constexpr int kExitUsage = 2;

/// Environment variable naming the default calibration file.
inline constexpr const char* kCalibrationEnv = "VANGUARD_CALIBRATION";

/// Runs one subcommand (calibrate, estimate, evaluate, area, sweep, serve, gen).
/// `args` excludes the program name. Results go to `out`, diagnostics to `err`.
int cli_dispatch(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

} // namespace gsdanchor
