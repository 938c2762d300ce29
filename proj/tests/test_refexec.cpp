// SPDX-License-Identifier: Apache-2.0
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "nasforge/ir.hpp"
#include "nasforge/refexec.hpp"
#include "nasforge/rng.hpp"

using namespace nasforge;
using namespace nasforge::ir;
using namespace nasforge::refexec;

namespace {

PrimitiveOp conv_op(OpKind kind, TensorShape in, int out_c, int k, int stride,
                    int groups = 1) {
  PrimitiveOp op;
  op.kind = kind;
  op.in = in;
  op.out = conv_output_shape(in, k, stride, out_c);
  op.k = kind == OpKind::kPointwise ? 1 : k;
  op.stride = stride;
  op.groups = groups;
  return op;
}

DenseTensor filled(TensorShape shape, std::vector<double> vals) {
  DenseTensor t = make_tensor(shape);
  t.data = std::move(vals);
  return t;
}

DenseTensor ones(TensorShape shape) {
  DenseTensor t = make_tensor(shape);
  for (double& v : t.data) v = 1.0;
  return t;
}

}  // namespace

TEST_CASE("pointwise is a per-pixel matrix product") {
  const PrimitiveOp op = conv_op(OpKind::kPointwise, {1, 1, 2}, 1, 1, 1);
  const DenseTensor in = filled({1, 1, 2}, {1.0, 2.0});
  const DenseTensor out = exec_op(op, {in}, {3.0, 4.0});
  REQUIRE(out.shape == TensorShape{1, 1, 1});
  CHECK(out.at(0, 0, 0) == doctest::Approx(11.0));

  // Two outputs: weights are [c_in][c_out] with c_out innermost.
  const PrimitiveOp op2 = conv_op(OpKind::kPointwise, {1, 1, 2}, 2, 1, 1);
  const DenseTensor out2 = exec_op(op2, {in}, {1.0, 10.0, 2.0, 20.0});
  CHECK(out2.at(0, 0, 0) == doctest::Approx(5.0));
  CHECK(out2.at(0, 0, 1) == doctest::Approx(50.0));
}

TEST_CASE("depthwise window sums under same padding") {
  const PrimitiveOp op =
      conv_op(OpKind::kDepthwiseConv2d, {3, 3, 1}, 1, 3, 1);
  const DenseTensor out = exec_op(op, {ones({3, 3, 1})},
                                  std::vector<double>(9, 1.0));
  REQUIRE(out.shape == TensorShape{3, 3, 1});
  CHECK(out.at(1, 1, 0) == doctest::Approx(9.0));  // full window
  CHECK(out.at(0, 0, 0) == doctest::Approx(4.0));  // corner, 2x2 in bounds
  CHECK(out.at(0, 1, 0) == doctest::Approx(6.0));  // edge, 2x3 in bounds
}

TEST_CASE("stride-two padding puts the smaller pad on the leading edge") {
  // in 4, k 3, stride 2: out 2, pad_total 1, leading pad 0. The (1,1)
  // window covers rows/cols 2..4 so one row and column hang off the end.
  const PrimitiveOp op =
      conv_op(OpKind::kDepthwiseConv2d, {4, 4, 1}, 1, 3, 2);
  const DenseTensor out = exec_op(op, {ones({4, 4, 1})},
                                  std::vector<double>(9, 1.0));
  REQUIRE(out.shape == TensorShape{2, 2, 1});
  CHECK(out.at(0, 0, 0) == doctest::Approx(9.0));
  CHECK(out.at(1, 1, 0) == doctest::Approx(4.0));
}

TEST_CASE("full conv on a single pixel reads only the centre tap") {
  const PrimitiveOp op = conv_op(OpKind::kConv2d, {1, 1, 1}, 1, 3, 1);
  std::vector<double> w(9, 0.0);
  w[4] = 2.0;  // [ky=1][kx=1][ci=0][co=0]
  const DenseTensor out = exec_op(op, {filled({1, 1, 1}, {5.0})}, w);
  CHECK(out.at(0, 0, 0) == doctest::Approx(10.0));
}

TEST_CASE("grouped conv reads only its group's input channels") {
  const PrimitiveOp op = conv_op(OpKind::kGroupConv2d, {1, 1, 4}, 2, 1, 1, 2);
  const DenseTensor in = filled({1, 1, 4}, {1.0, 2.0, 3.0, 4.0});
  // Weight index is ci*out_c + oc with ci counted within the group; output 0
  // sums input channels {0,1}, output 1 sums {2,3}.
  const DenseTensor out = exec_op(op, {in}, {1.0, 1.0, 1.0, 1.0});
  CHECK(out.at(0, 0, 0) == doctest::Approx(3.0));
  CHECK(out.at(0, 0, 1) == doctest::Approx(7.0));
}

TEST_CASE("data-movement ops") {
  PrimitiveOp slice;
  slice.kind = OpKind::kSliceChannels;
  slice.in = {1, 1, 4};
  slice.out = {1, 1, 2};
  slice.slice_begin = 1;
  slice.slice_end = 3;
  const DenseTensor in = filled({1, 1, 4}, {1.0, 2.0, 3.0, 4.0});
  const DenseTensor sl = exec_op(slice, {in}, {});
  CHECK(sl.at(0, 0, 0) == doctest::Approx(2.0));
  CHECK(sl.at(0, 0, 1) == doctest::Approx(3.0));

  PrimitiveOp concat;
  concat.kind = OpKind::kConcatChannels;
  concat.in = {1, 1, 4};
  concat.out = {1, 1, 4};
  const DenseTensor a = filled({1, 1, 2}, {1.0, 2.0});
  const DenseTensor b = filled({1, 1, 2}, {3.0, 4.0});
  const DenseTensor cat = exec_op(concat, {a, b}, {});
  for (int c = 0; c < 4; ++c)
    CHECK(cat.at(0, 0, c) == doctest::Approx(c + 1.0));

  PrimitiveOp add;
  add.kind = OpKind::kResidualAdd;
  add.in = {1, 1, 2};
  add.out = {1, 1, 2};
  const DenseTensor sum = exec_op(add, {a, b}, {});
  CHECK(sum.at(0, 0, 0) == doctest::Approx(4.0));
  CHECK(sum.at(0, 0, 1) == doctest::Approx(6.0));
}

TEST_CASE("one-group conv executes exactly like the full conv") {
  SplitMix64 rng(11);
  for (int i = 0; i < 8; ++i) {
    const int h = 1 + static_cast<int>(rng.bounded(6));
    const int c = 1 + static_cast<int>(rng.bounded(8));
    const int out_c = 1 + static_cast<int>(rng.bounded(8));
    const int k = 1 + 2 * static_cast<int>(rng.bounded(2));
    const PrimitiveOp full = conv_op(OpKind::kConv2d, {h, h, c}, out_c, k, 1);
    PrimitiveOp g1 = full;
    g1.kind = OpKind::kGroupConv2d;
    g1.groups = 1;
    const DenseTensor in = gen_random_tensor(full.in, 100 + i);
    const std::vector<double> w = gen_random_weights(full, 200 + i);
    CHECK(max_abs_diff(exec_op(full, {in}, w), exec_op(g1, {in}, w)) == 0.0);
  }
}

TEST_CASE("per-channel grouping executes exactly like depthwise") {
  SplitMix64 rng(12);
  for (int i = 0; i < 8; ++i) {
    const int h = 1 + static_cast<int>(rng.bounded(6));
    const int c = 1 + static_cast<int>(rng.bounded(12));
    const int k = 1 + 2 * static_cast<int>(rng.bounded(2));
    const PrimitiveOp dw =
        conv_op(OpKind::kDepthwiseConv2d, {h, h, c}, c, k, 1);
    PrimitiveOp gc = dw;
    gc.kind = OpKind::kGroupConv2d;
    gc.groups = c;
    const DenseTensor in = gen_random_tensor(dw.in, 300 + i);
    // Both kinds hold one input lane per output channel, same layout.
    const std::vector<double> w = gen_random_weights(dw, 400 + i);
    CHECK(max_abs_diff(exec_op(dw, {in}, w), exec_op(gc, {in}, w)) == 0.0);
  }
}

TEST_CASE("grouped conv matches its slice/conv/concat decomposition") {
  SplitMix64 rng(13);
  int checked = 0;
  while (checked < 25) {
    const int g = 1 + static_cast<int>(rng.bounded(4));
    const int cig = 1 + static_cast<int>(rng.bounded(6));
    const int cog = 1 + static_cast<int>(rng.bounded(6));
    const int h = 1 + static_cast<int>(rng.bounded(8));
    const int w = 1 + static_cast<int>(rng.bounded(8));
    const int k = 1 + 2 * static_cast<int>(rng.bounded(3));
    const int stride = 1 + static_cast<int>(rng.bounded(2));
    if (g * cig > 64 || g * cog > 64) continue;
    ++checked;

    const PrimitiveOp gc = conv_op(OpKind::kGroupConv2d, {h, w, g * cig},
                                   g * cog, k, stride, g);
    const DenseTensor in = gen_random_tensor(gc.in, 500 + checked);
    const std::vector<double> weights = gen_random_weights(gc, 600 + checked);

    const DenseTensor direct = exec_op(gc, {in}, weights);

    const PrimitiveGraph dec = decompose_gc(gc);
    const std::vector<std::vector<double>> branches =
        split_gc_weights(gc, weights);
    REQUIRE(static_cast<int>(branches.size()) == g);
    WeightSet ws;
    if (g == 1)
      ws[0] = branches[0];  // decomposition collapses to one conv node
    else
      for (int b = 0; b < g; ++b) ws[2 * b + 1] = branches[b];
    const DenseTensor via_graph = exec_graph(dec, in, ws);

    CHECK(max_abs_diff(direct, via_graph) <= 1e-9);
  }
}

TEST_CASE("split weights pick each branch's rows and columns") {
  // k=1, two groups, one output column each: branch gi keeps column gi.
  const PrimitiveOp gc = conv_op(OpKind::kGroupConv2d, {1, 1, 4}, 2, 1, 1, 2);
  const std::vector<std::vector<double>> b =
      split_gc_weights(gc, {1.0, 30.0, 2.0, 40.0});
  REQUIRE(b.size() == 2);
  CHECK(b[0] == std::vector<double>{1.0, 2.0});
  CHECK(b[1] == std::vector<double>{30.0, 40.0});

  // One group passes the weights through whole.
  const PrimitiveOp g1 = conv_op(OpKind::kGroupConv2d, {1, 1, 2}, 2, 1, 1, 1);
  const std::vector<double> w{1.0, 2.0, 3.0, 4.0};
  const std::vector<std::vector<double>> whole = split_gc_weights(g1, w);
  REQUIRE(whole.size() == 1);
  CHECK(whole[0] == w);
}

TEST_CASE("weight vectors carry one value per parameter") {
  const PrimitiveOp gc =
      conv_op(OpKind::kGroupConv2d, {14, 14, 64}, 384, 3, 1, 2);
  CHECK(gen_random_weights(gc, 1).size() ==
        static_cast<std::size_t>(count_params(gc)));
  const PrimitiveOp dw =
      conv_op(OpKind::kDepthwiseConv2d, {14, 14, 384}, 384, 3, 1);
  CHECK(gen_random_weights(dw, 1).size() == 3456);
}

TEST_CASE("graph execution chains nodes and applies the residual skip") {
  IbnSpec spec;
  spec.variant = IbnVariant::kDepthwise;
  spec.in_c = 8;
  spec.out_c = 8;
  spec.k = 3;
  spec.expansion = {2, 1};

  const PrimitiveGraph plain = lower_ibn(spec, 5, 5);
  spec.use_residual = true;
  const PrimitiveGraph res = lower_ibn(spec, 5, 5);

  const DenseTensor in = gen_random_tensor({5, 5, 8}, 42);
  // Shared prefix means shared per-node weight substreams.
  const WeightSet w = gen_graph_weights(plain, 7);
  WeightSet wr = gen_graph_weights(res, 7);
  for (const auto& [node, vec] : w) CHECK(wr[node] == vec);

  const DenseTensor base = exec_graph(plain, in, w);
  const DenseTensor skipped = exec_graph(res, in, wr);
  REQUIRE(base.shape == skipped.shape);
  double worst = 0.0;
  for (int y = 0; y < 5; ++y)
    for (int x = 0; x < 5; ++x)
      for (int c = 0; c < 8; ++c)
        worst = std::max(worst, std::abs(skipped.at(y, x, c) -
                                         (base.at(y, x, c) + in.at(y, x, c))));
  CHECK(worst == 0.0);
}

TEST_CASE("random fills are seed-deterministic and bounded") {
  const DenseTensor a = gen_random_tensor({4, 4, 4}, 99);
  const DenseTensor b = gen_random_tensor({4, 4, 4}, 99);
  const DenseTensor c = gen_random_tensor({4, 4, 4}, 100);
  CHECK(a.data == b.data);
  CHECK(a.data != c.data);
  for (double v : a.data) {
    CHECK(v >= -1.0);
    CHECK(v < 1.0);
  }

  const PrimitiveOp op = conv_op(OpKind::kConv2d, {3, 3, 4}, 4, 3, 1);
  CHECK(gen_random_weights(op, 5) == gen_random_weights(op, 5));
  CHECK(gen_random_weights(op, 5) != gen_random_weights(op, 6));
}

TEST_CASE("max_abs_diff reports the worst element") {
  const DenseTensor a = filled({1, 1, 3}, {1.0, 2.0, 3.0});
  const DenseTensor b = filled({1, 1, 3}, {1.0, 2.5, 2.0});
  CHECK(max_abs_diff(a, b) == doctest::Approx(1.0));
  CHECK(max_abs_diff(a, a) == 0.0);
}
