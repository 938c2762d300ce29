// SPDX-License-Identifier: Apache-2.0
//
// Estimate service client. A background reader thread correlates response
// frames to pending requests by request_id, so several threads can issue
// estimates over one connection. Failures are distinct on purpose:
// TimeoutError (no answer in time, request may still be served),
// ConnectionLostError (peer went away, no answer will come) and
// ProtocolError (the peer spoke, but not this protocol).
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>

#include "nasforge/cost.hpp"
#include "nasforge/engine.hpp"
#include "nasforge/ir.hpp"
#include "nasforge/wire.hpp"

namespace nasforge::ppe {

struct EstimateResult {
  wire::Status status = wire::Status::kOk;
  std::string error;          // set when status is not ok
  wire::json metrics_json;    // served bytes, untouched
  cost::ModelMetrics metrics; // decoded form, valid when status is ok
};

class PpeClient {
 public:
  // Connects eagerly; throws NetworkError when the server is unreachable.
  PpeClient(const std::string& host, std::uint16_t port);
  ~PpeClient();

  PpeClient(const PpeClient&) = delete;
  PpeClient& operator=(const PpeClient&) = delete;

  // Sends one estimate request and waits for its response. accel nullopt
  // asks the server to use its default config. Thread-safe.
  EstimateResult estimate(const ir::ModelIr& model,
                          wire::Detail detail = wire::Detail::kTotals,
                          const std::optional<cost::AcceleratorConfig>& accel =
                              std::nullopt,
                          int timeout_ms = 10000);

  void close();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Remote-backed metrics provider for the search engine. Rejected models
// become failed trials (ValidationError); transport failures propagate
// and abort the search.
class PpeEvaluator : public search::Evaluator {
 public:
  explicit PpeEvaluator(PpeClient& client,
                        std::optional<cost::AcceleratorConfig> accel =
                            std::nullopt)
      : client_(client), accel_(std::move(accel)) {}

  cost::ModelMetrics evaluate(const ir::ModelIr& model) override {
    EstimateResult r =
        client_.estimate(model, wire::Detail::kTotals, accel_);
    if (r.status != wire::Status::kOk) throw ValidationError(r.error);
    return r.metrics;
  }

 private:
  PpeClient& client_;
  std::optional<cost::AcceleratorConfig> accel_;
};

}  // namespace nasforge::ppe
