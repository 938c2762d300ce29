// SPDX-License-Identifier: Apache-2.0
//
// Estimate service wire protocol: length-prefixed JSON frames over TCP.
// A frame is a 4-byte big-endian payload length followed by that many
// bytes of UTF-8 JSON. Zero-length and oversized frames are protocol
// violations, not empty messages.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>

#include "json.hpp"

#include "nasforge/cost.hpp"
#include "nasforge/errors.hpp"
#include "nasforge/ir.hpp"

namespace nasforge::wire {

using json = nlohmann::json;

inline constexpr std::uint32_t kMaxFrameBytes = 16u * 1024u * 1024u;

// Throws ProtocolError on empty or oversized payloads.
std::string encode_frame(std::string_view payload);
std::uint32_t decode_frame_length(const unsigned char header[4]);

// --------------------------------------------------------------- sockets --

// Blocking POSIX helpers shared by server and client. connect_tcp throws
// NetworkError; write/read throw ConnectionLostError when the peer goes
// away mid-frame. read_exact returns false only on clean EOF before any
// byte arrived.
int connect_tcp(const std::string& host, std::uint16_t port);
void write_all(int fd, const void* data, std::size_t n);
bool read_exact(int fd, void* data, std::size_t n);

// nullopt on clean EOF at a frame boundary.
std::optional<std::string> read_frame(int fd);
void write_frame(int fd, std::string_view payload);

// -------------------------------------------------------------- messages --

enum class Detail { kTotals, kPerOp };
const char* detail_name(Detail d);
std::optional<Detail> parse_detail(const std::string& name);

enum class Status { kOk, kInvalidModel, kInternalError };
const char* status_name(Status s);
std::optional<Status> parse_status(const std::string& name);

// accel is either the literal "default" (nullopt here) or an inline
// accelerator config object.
struct EstimateRequest {
  std::string request_id;
  ir::ModelIr model;
  std::optional<cost::AcceleratorConfig> accel;
  Detail detail = Detail::kTotals;
};

json request_to_json(const EstimateRequest& req);
EstimateRequest request_from_json(const json& doc, const std::string& path);

// metrics is present exactly when status is ok; error exactly otherwise.
// metrics stays a raw JSON value so callers can compare the served bytes
// against a local estimate without a decode/re-encode step in between.
struct EstimateResponse {
  std::string request_id;
  Status status = Status::kOk;
  json metrics;
  std::string error;
};

json response_to_json(const EstimateResponse& resp);
EstimateResponse response_from_json(const json& doc, const std::string& path);

}  // namespace nasforge::wire
