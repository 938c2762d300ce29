// SPDX-License-Identifier: Apache-2.0

#include "nasforge/ppe_client.hpp"

#include <sys/socket.h>
#include <unistd.h>

#include <chrono>
#include <condition_variable>
#include <map>
#include <mutex>
#include <thread>

#include "nasforge/json_strict.hpp"
#include "nasforge/serde.hpp"

namespace nasforge::ppe {

struct PpeClient::Impl {
  int fd = -1;
  std::mutex write_mutex;

  std::mutex state_mutex;
  std::condition_variable state_cv;
  std::uint64_t next_id = 1;
  std::map<std::string, wire::EstimateResponse> arrived;
  bool down = false;          // no more responses will arrive
  std::string down_reason;
  bool down_is_protocol = false;
  std::thread reader;

  ~Impl() { shutdown_fd(); if (reader.joinable()) reader.join(); close_fd(); }

  void shutdown_fd() {
    if (fd >= 0) ::shutdown(fd, SHUT_RDWR);
  }
  void close_fd() {
    if (fd >= 0) {
      ::close(fd);
      fd = -1;
    }
  }

  void reader_loop() {
    for (;;) {
      std::optional<std::string> payload;
      try {
        payload = wire::read_frame(fd);
      } catch (const ProtocolError& e) {
        mark_down(e.what(), true);
        return;
      } catch (const NetworkError& e) {
        mark_down(e.what(), false);
        return;
      }
      if (!payload) {
        mark_down("connection closed by server", false);
        return;
      }
      wire::EstimateResponse resp;
      try {
        wire::json doc = jsonx::parse_strict(*payload);
        resp = wire::response_from_json(doc, "response");
      } catch (const std::exception& e) {
        mark_down(std::string("unintelligible response: ") + e.what(), true);
        return;
      }
      {
        std::lock_guard<std::mutex> lock(state_mutex);
        arrived[resp.request_id] = std::move(resp);
      }
      state_cv.notify_all();
    }
  }

  void mark_down(const std::string& reason, bool protocol) {
    {
      std::lock_guard<std::mutex> lock(state_mutex);
      if (!down) {
        down = true;
        down_reason = reason;
        down_is_protocol = protocol;
      }
    }
    state_cv.notify_all();
  }
};

PpeClient::PpeClient(const std::string& host, std::uint16_t port)
    : impl_(std::make_unique<Impl>()) {
  impl_->fd = wire::connect_tcp(host, port);
  impl_->reader = std::thread([impl = impl_.get()] { impl->reader_loop(); });
}

PpeClient::~PpeClient() = default;

void PpeClient::close() {
  impl_->shutdown_fd();
}

EstimateResult PpeClient::estimate(
    const ir::ModelIr& model, wire::Detail detail,
    const std::optional<cost::AcceleratorConfig>& accel, int timeout_ms) {
  wire::EstimateRequest req;
  {
    std::lock_guard<std::mutex> lock(impl_->state_mutex);
    if (impl_->down)
      throw ConnectionLostError(impl_->down_reason);
    req.request_id = "c" + std::to_string(impl_->next_id++);
  }
  req.model = model;
  req.accel = accel;
  req.detail = detail;
  const std::string payload = wire::request_to_json(req).dump();
  {
    std::lock_guard<std::mutex> lock(impl_->write_mutex);
    wire::write_frame(impl_->fd, payload);
  }

  std::unique_lock<std::mutex> lock(impl_->state_mutex);
  const auto deadline = std::chrono::steady_clock::now() +
                        std::chrono::milliseconds(timeout_ms);
  for (;;) {
    auto it = impl_->arrived.find(req.request_id);
    if (it != impl_->arrived.end()) {
      wire::EstimateResponse resp = std::move(it->second);
      impl_->arrived.erase(it);
      lock.unlock();
      EstimateResult result;
      result.status = resp.status;
      result.error = resp.error;
      result.metrics_json = std::move(resp.metrics);
      if (result.status == wire::Status::kOk)
        result.metrics =
            serde::metrics_from_json(result.metrics_json, "response/metrics");
      return result;
    }
    if (impl_->down) {
      if (impl_->down_is_protocol) throw ProtocolError(impl_->down_reason);
      throw ConnectionLostError(impl_->down_reason);
    }
    if (impl_->state_cv.wait_until(lock, deadline) ==
        std::cv_status::timeout) {
      if (impl_->arrived.count(req.request_id) || impl_->down) continue;
      throw TimeoutError("no response to " + req.request_id + " within " +
                         std::to_string(timeout_ms) + " ms");
    }
  }
}

}  // namespace nasforge::ppe
