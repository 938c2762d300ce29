// SPDX-License-Identifier: Apache-2.0
//
// TCP estimate service. One reader thread per connection feeds a shared
// worker pool capped at max_concurrent in-flight estimates; responses are
// written back as they finish, so a slow request never blocks the frames
// behind it. Correlation is by request_id, never by arrival order.
//
// Error policy: a frame that is not parseable JSON, or whose request_id
// cannot be recovered, poisons the connection and it is closed. A request
// with a recoverable request_id gets a per-request error response and the
// connection stays up.
#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include "nasforge/cost.hpp"

namespace nasforge::ppe {

struct ServerOptions {
  std::string host = "127.0.0.1";
  std::uint16_t port = 0;  // 0 picks an ephemeral port
  cost::AcceleratorConfig config;
  int max_concurrent = 4;
};

class PpeServer {
 public:
  explicit PpeServer(ServerOptions options);
  ~PpeServer();

  PpeServer(const PpeServer&) = delete;
  PpeServer& operator=(const PpeServer&) = delete;

  // Binds and starts serving. Throws BindError when the address is taken.
  void start();

  // Port actually bound, valid after start().
  std::uint16_t port() const;

  // Stops accepting, drains queued and in-flight requests, writes their
  // responses, then closes every connection. Idempotent.
  void stop();

  bool running() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace nasforge::ppe
