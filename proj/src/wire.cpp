// SPDX-License-Identifier: Apache-2.0

#include "nasforge/wire.hpp"

#include <arpa/inet.h>
#include <netdb.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "nasforge/json_strict.hpp"
#include "nasforge/serde.hpp"

namespace nasforge::wire {

std::string encode_frame(std::string_view payload) {
  if (payload.empty()) throw ProtocolError("zero-length frame");
  if (payload.size() > kMaxFrameBytes)
    throw ProtocolError("frame of " + std::to_string(payload.size()) +
                        " bytes exceeds the 16 MiB limit");
  const std::uint32_t n = static_cast<std::uint32_t>(payload.size());
  std::string out;
  out.reserve(4 + payload.size());
  out.push_back(static_cast<char>((n >> 24) & 0xff));
  out.push_back(static_cast<char>((n >> 16) & 0xff));
  out.push_back(static_cast<char>((n >> 8) & 0xff));
  out.push_back(static_cast<char>(n & 0xff));
  out.append(payload.data(), payload.size());
  return out;
}

std::uint32_t decode_frame_length(const unsigned char header[4]) {
  const std::uint32_t n =
      (static_cast<std::uint32_t>(header[0]) << 24) |
      (static_cast<std::uint32_t>(header[1]) << 16) |
      (static_cast<std::uint32_t>(header[2]) << 8) |
      static_cast<std::uint32_t>(header[3]);
  if (n == 0) throw ProtocolError("zero-length frame");
  if (n > kMaxFrameBytes)
    throw ProtocolError("frame of " + std::to_string(n) +
                        " bytes exceeds the 16 MiB limit");
  return n;
}

// --------------------------------------------------------------- sockets --

int connect_tcp(const std::string& host, std::uint16_t port) {
  addrinfo hints{};
  hints.ai_family = AF_UNSPEC;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  const std::string service = std::to_string(port);
  int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res);
  if (rc != 0)
    throw NetworkError("cannot resolve " + host + ": " + gai_strerror(rc));
  int fd = -1;
  for (addrinfo* ai = res; ai != nullptr; ai = ai->ai_next) {
    fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
    if (fd < 0) continue;
    if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
    ::close(fd);
    fd = -1;
  }
  ::freeaddrinfo(res);
  if (fd < 0)
    throw NetworkError("cannot connect to " + host + ":" + service + ": " +
                       std::strerror(errno));
  return fd;
}

void write_all(int fd, const void* data, std::size_t n) {
  const char* p = static_cast<const char*>(data);
  while (n > 0) {
    ssize_t w = ::send(fd, p, n, MSG_NOSIGNAL);
    if (w < 0) {
      if (errno == EINTR) continue;
      throw ConnectionLostError(std::string("write failed: ") +
                                std::strerror(errno));
    }
    p += w;
    n -= static_cast<std::size_t>(w);
  }
}

bool read_exact(int fd, void* data, std::size_t n) {
  char* p = static_cast<char*>(data);
  std::size_t got = 0;
  while (got < n) {
    ssize_t r = ::recv(fd, p + got, n - got, 0);
    if (r < 0) {
      if (errno == EINTR) continue;
      throw ConnectionLostError(std::string("read failed: ") +
                                std::strerror(errno));
    }
    if (r == 0) {
      if (got == 0) return false;
      throw ConnectionLostError("connection closed mid-frame");
    }
    got += static_cast<std::size_t>(r);
  }
  return true;
}

std::optional<std::string> read_frame(int fd) {
  unsigned char header[4];
  if (!read_exact(fd, header, 4)) return std::nullopt;
  const std::uint32_t n = decode_frame_length(header);
  std::string payload(n, '\0');
  if (!read_exact(fd, payload.data(), n))
    throw ConnectionLostError("connection closed mid-frame");
  return payload;
}

void write_frame(int fd, std::string_view payload) {
  const std::string frame = encode_frame(payload);
  write_all(fd, frame.data(), frame.size());
}

// -------------------------------------------------------------- messages --

const char* detail_name(Detail d) {
  return d == Detail::kTotals ? "totals" : "per_op";
}

std::optional<Detail> parse_detail(const std::string& name) {
  if (name == "totals") return Detail::kTotals;
  if (name == "per_op") return Detail::kPerOp;
  return std::nullopt;
}

const char* status_name(Status s) {
  switch (s) {
    case Status::kOk: return "ok";
    case Status::kInvalidModel: return "invalid_model";
    case Status::kInternalError: return "internal_error";
  }
  return "internal_error";
}

std::optional<Status> parse_status(const std::string& name) {
  if (name == "ok") return Status::kOk;
  if (name == "invalid_model") return Status::kInvalidModel;
  if (name == "internal_error") return Status::kInternalError;
  return std::nullopt;
}

json request_to_json(const EstimateRequest& req) {
  json doc;
  doc["request_id"] = req.request_id;
  doc["model"] = serde::model_to_json(req.model);
  if (req.accel)
    doc["accel"] = serde::accel_to_json(*req.accel);
  else
    doc["accel"] = "default";
  doc["detail"] = detail_name(req.detail);
  return doc;
}

EstimateRequest request_from_json(const json& doc, const std::string& path) {
  jsonx::ObjectReader r(doc, path);
  EstimateRequest req;
  req.request_id = r.require_string("request_id");
  if (req.request_id.empty())
    jsonx::fail(r.member_path("request_id"), "must not be empty");
  req.model = serde::model_from_json(r.require("model"),
                                     r.member_path("model"));
  if (const json* accel = r.optional("accel")) {
    if (accel->is_string()) {
      if (accel->get<std::string>() != "default")
        jsonx::fail(r.member_path("accel"),
                    "expected \"default\" or an inline config object");
    } else {
      req.accel = serde::accel_from_json(*accel, r.member_path("accel"));
    }
  }
  const std::string detail = r.optional_string("detail", "totals");
  auto d = parse_detail(detail);
  if (!d)
    jsonx::fail(r.member_path("detail"),
                "expected \"totals\" or \"per_op\", got \"" + detail + "\"");
  req.detail = *d;
  r.finish();
  return req;
}

json response_to_json(const EstimateResponse& resp) {
  json doc;
  doc["request_id"] = resp.request_id;
  doc["status"] = status_name(resp.status);
  if (resp.status == Status::kOk)
    doc["metrics"] = resp.metrics;
  else
    doc["error"] = resp.error;
  return doc;
}

EstimateResponse response_from_json(const json& doc, const std::string& path) {
  jsonx::ObjectReader r(doc, path);
  EstimateResponse resp;
  resp.request_id = r.require_string("request_id");
  const std::string status = r.require_string("status");
  auto s = parse_status(status);
  if (!s)
    jsonx::fail(r.member_path("status"), "unknown status \"" + status + "\"");
  resp.status = *s;
  if (resp.status == Status::kOk) {
    resp.metrics = r.require("metrics");
  } else {
    resp.error = r.require_string("error");
  }
  r.finish();
  return resp;
}

}  // namespace nasforge::wire
