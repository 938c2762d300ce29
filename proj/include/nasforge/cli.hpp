// SPDX-License-Identifier: Apache-2.0
//
// Command-line driver. run_cli is the whole program minus process glue so
// tests can drive every path in-process and assert on exit codes and
// streams.
#pragma once

#include <ostream>
#include <string>
#include <vector>

namespace nasforge::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitUsage = 1;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;
inline constexpr int kExitNetwork = 4;

// args excludes the program name. Diagnostics go to err, results to out.
int run_cli(const std::vector<std::string>& args, std::ostream& out,
            std::ostream& err);

// Asks a blocking `serve` run to shut down cleanly; what SIGINT/SIGTERM do.
void request_serve_stop();

}  // namespace nasforge::cli
