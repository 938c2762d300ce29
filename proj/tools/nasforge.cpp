// SPDX-License-Identifier: Apache-2.0

#include <csignal>
#include <iostream>
#include <vector>

#include "nasforge/cli.hpp"

namespace {

extern "C" void handle_stop_signal(int) { nasforge::cli::request_serve_stop(); }

}  // namespace

int main(int argc, char** argv) {
  std::signal(SIGINT, handle_stop_signal);
  std::signal(SIGTERM, handle_stop_signal);
  std::signal(SIGPIPE, SIG_IGN);

  std::vector<std::string> args(argv + 1, argv + argc);
  return nasforge::cli::run_cli(args, std::cout, std::cerr);
}
