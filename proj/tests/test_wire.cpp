// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <sys/socket.h>
#include <unistd.h>

#include <cstring>
#include <string>
#include <thread>

#include "nasforge/errors.hpp"
#include "nasforge/serde.hpp"
#include "nasforge/wire.hpp"

using namespace nasforge;
using namespace nasforge::wire;

namespace {

ir::ModelIr demo_model() {
  ir::IbnSpec block;
  block.variant = ir::IbnVariant::kDepthwise;
  block.in_c = 64;
  block.out_c = 64;
  block.k = 3;
  block.expansion = {6, 1};
  ir::ModelIr m;
  m.name = "demo";
  m.input = {14, 14, 64};
  m.items.emplace_back(block);
  return m;
}

struct SocketPair {
  SocketPair() { REQUIRE(::socketpair(AF_UNIX, SOCK_STREAM, 0, fds) == 0); }
  ~SocketPair() {
    if (fds[0] >= 0) ::close(fds[0]);
    if (fds[1] >= 0) ::close(fds[1]);
  }
  int fds[2];
};

}  // namespace

TEST_CASE("frames carry a big-endian length prefix") {
  const std::string f = encode_frame("hello");
  REQUIRE(f.size() == 9);
  CHECK(f[0] == '\x00');
  CHECK(f[1] == '\x00');
  CHECK(f[2] == '\x00');
  CHECK(f[3] == '\x05');
  CHECK(f.substr(4) == "hello");

  unsigned char hdr[4] = {0, 0, 1, 2};
  CHECK(decode_frame_length(hdr) == 258);
}

TEST_CASE("empty and oversized frames are protocol violations") {
  CHECK_THROWS_AS(encode_frame(""), ProtocolError);
  CHECK_THROWS_AS(encode_frame(std::string(kMaxFrameBytes + 1, 'x')),
                  ProtocolError);
  CHECK_NOTHROW(encode_frame(std::string(16, 'x')));

  unsigned char zero[4] = {0, 0, 0, 0};
  CHECK_THROWS_AS(decode_frame_length(zero), ProtocolError);
  unsigned char huge[4] = {0xff, 0xff, 0xff, 0xff};
  CHECK_THROWS_AS(decode_frame_length(huge), ProtocolError);
  // The cap itself is legal.
  unsigned char cap[4] = {0x01, 0x00, 0x00, 0x00};
  CHECK(decode_frame_length(cap) == kMaxFrameBytes);
}

TEST_CASE("frames survive a socket round trip") {
  SocketPair sp;
  const std::string payload = "{\"x\": 1}";
  write_frame(sp.fds[0], payload);
  const auto got = read_frame(sp.fds[1]);
  REQUIRE(got.has_value());
  CHECK(*got == payload);

  // Clean close between frames reads as end of stream.
  ::close(sp.fds[0]);
  sp.fds[0] = -1;
  CHECK(!read_frame(sp.fds[1]).has_value());
}

TEST_CASE("a peer dying mid-frame is a lost connection") {
  SocketPair sp;
  const char partial[2] = {0, 0};
  REQUIRE(::send(sp.fds[0], partial, 2, 0) == 2);
  ::close(sp.fds[0]);
  sp.fds[0] = -1;
  CHECK_THROWS_AS(read_frame(sp.fds[1]), ConnectionLostError);
}

TEST_CASE("detail and status names") {
  CHECK(detail_name(Detail::kTotals) == std::string("totals"));
  CHECK(detail_name(Detail::kPerOp) == std::string("per_op"));
  CHECK(parse_detail("totals") == Detail::kTotals);
  CHECK(parse_detail("per_op") == Detail::kPerOp);
  CHECK(!parse_detail("everything").has_value());

  CHECK(status_name(Status::kOk) == std::string("ok"));
  CHECK(status_name(Status::kInvalidModel) == std::string("invalid_model"));
  CHECK(status_name(Status::kInternalError) == std::string("internal_error"));
  CHECK(parse_status("ok") == Status::kOk);
  CHECK(!parse_status("teapot").has_value());
}

TEST_CASE("requests round-trip through their wire form") {
  EstimateRequest req;
  req.request_id = "r-17";
  req.model = demo_model();
  req.detail = Detail::kPerOp;

  const json doc = request_to_json(req);
  CHECK(doc.at("accel") == "default");
  const EstimateRequest back = request_from_json(doc, "");
  CHECK(back.request_id == "r-17");
  CHECK(back.detail == Detail::kPerOp);
  CHECK(!back.accel.has_value());
  CHECK(back.model.name == "demo");
  CHECK(validate_model(back.model).empty());

  // Inline accelerator override.
  req.accel = cost::load_accelerator_config(NASFORGE_SOURCE_DIR
                                            "/configs/accelerator.json");
  const EstimateRequest inl = request_from_json(request_to_json(req), "");
  REQUIRE(inl.accel.has_value());
  CHECK(inl.accel->mac_per_cycle == 4096);
}

TEST_CASE("request parsing is strict") {
  const json good = request_to_json([] {
    EstimateRequest r;
    r.request_id = "a";
    r.model = demo_model();
    return r;
  }());

  json no_id = good;
  no_id.erase("request_id");
  CHECK_THROWS_AS(request_from_json(no_id, ""), SchemaError);

  json empty_id = good;
  empty_id["request_id"] = "";
  CHECK_THROWS_AS(request_from_json(empty_id, ""), SchemaError);

  json bad_detail = good;
  bad_detail["detail"] = "everything";
  CHECK_THROWS_AS(request_from_json(bad_detail, ""), SchemaError);

  json extra = good;
  extra["priority"] = 3;
  CHECK_THROWS_AS(request_from_json(extra, ""), SchemaError);

  json default_detail = good;
  default_detail.erase("detail");
  CHECK(request_from_json(default_detail, "").detail == Detail::kTotals);
}

TEST_CASE("responses carry metrics exactly when ok") {
  EstimateResponse ok;
  ok.request_id = "r";
  ok.status = Status::kOk;
  ok.metrics = json{{"cycles", 15936}};
  const json doc = response_to_json(ok);
  CHECK(doc.contains("metrics"));
  CHECK(!doc.contains("error"));
  const EstimateResponse back = response_from_json(doc, "");
  CHECK(back.status == Status::kOk);
  CHECK(back.metrics.at("cycles") == 15936);

  EstimateResponse fail;
  fail.request_id = "r";
  fail.status = Status::kInvalidModel;
  fail.error = "stage consumes 96 channels but predecessor produces 64";
  const json fdoc = response_to_json(fail);
  CHECK(!fdoc.contains("metrics"));
  CHECK(fdoc.at("error") == fail.error);
  const EstimateResponse fback = response_from_json(fdoc, "");
  CHECK(fback.status == Status::kInvalidModel);
  CHECK(fback.error == fail.error);

  json wrong = fdoc;
  wrong["metrics"] = json::object();
  CHECK_THROWS_AS(response_from_json(wrong, ""), SchemaError);
  json statusless = doc;
  statusless.erase("status");
  CHECK_THROWS_AS(response_from_json(statusless, ""), SchemaError);
}
