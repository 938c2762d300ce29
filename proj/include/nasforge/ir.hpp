// SPDX-License-Identifier: Apache-2.0
//
// Primitive-op IR for inverted-bottleneck blocks and their group-convolution
// generalizations, plus exact parameter/MAC/byte accounting. Counting follows
// inference-time conventions: no bias terms, batch-norm folded into the
// convolution weights, "same" spatial padding.
#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <variant>
#include <vector>

namespace nasforge::ir {

// ---------------------------------------------------------------- shapes --

struct TensorShape {
  int h = 0;
  int w = 0;
  int c = 0;

  std::int64_t elems() const {
    return static_cast<std::int64_t>(h) * w * c;
  }
  bool operator==(const TensorShape&) const = default;
};

std::string to_string(const TensorShape& s);

// Output spatial dims under "same" padding: out = ceil(in / stride).
// k must be odd and positive; stride must be 1 or 2.
TensorShape conv_output_shape(const TensorShape& in, int k, int stride,
                              int out_c);

// ------------------------------------------------------------ primitives --

enum class OpKind : std::uint8_t {
  kConv2d,           // full k x k convolution
  kDepthwiseConv2d,  // one k x k filter per channel
  kGroupConv2d,      // g independent full convolutions over channel groups
  kPointwise,        // 1 x 1 convolution
  kSliceChannels,    // channel-range copy
  kConcatChannels,   // channel-axis concatenation
  kResidualAdd,      // elementwise sum of two equal-shaped tensors
};

const char* op_kind_name(OpKind kind);
bool is_conv_kind(OpKind kind);

// A single node's operator. Channel counts live in `in`/`out`; `in` holds
// the aggregate input shape for multi-input kinds (ConcatChannels sums the
// channel axis, ResidualAdd stores one operand since both match).
struct PrimitiveOp {
  OpKind kind = OpKind::kConv2d;
  TensorShape in;
  TensorShape out;
  int k = 1;            // kernel edge, conv kinds only
  int stride = 1;       // 1 or 2
  int groups = 1;       // GroupConv2d only; must divide in.c and out.c
  int slice_begin = 0;  // SliceChannels: [slice_begin, slice_end)
  int slice_end = 0;
  std::string name;     // breakdown label, e.g. "b3/kernel"
};

// Structural checks for a single op (divisibility, channel agreement,
// kernel oddness). Empty result means well formed.
struct Violation {
  std::string context;
  std::string message;
};
std::vector<Violation> validate_op(const PrimitiveOp& op);

// Trainable weight count. Conv kinds only; all other kinds hold none.
//   GroupConv2d: k^2 * (in.c/g) * (out.c/g) * g
// Conv2d and Pointwise are the g=1 case, DepthwiseConv2d the g=c case.
std::uint64_t count_params(const PrimitiveOp& op);

// Multiply-accumulates: out.h * out.w * count_params for conv kinds,
// zero otherwise.
std::uint64_t count_macs(const PrimitiveOp& op);

// Activation traffic in bytes at `bytes_per_elem` per element.
// Slice counts only the selected channel range on both sides; ResidualAdd
// reads two operands; ConcatChannels reads exactly what it writes.
struct ActBytes {
  std::uint64_t in_bytes = 0;
  std::uint64_t out_bytes = 0;
};
ActBytes count_act_bytes(const PrimitiveOp& op, int bytes_per_elem);

// ----------------------------------------------------------------- graph --

// Node inputs reference producer indices; kGraphInput marks the graph's
// single external input. Nodes are stored in topological order and the last
// node is the graph output.
inline constexpr int kGraphInput = -1;

struct GraphNode {
  PrimitiveOp op;
  std::vector<int> inputs;
};

struct PrimitiveGraph {
  TensorShape input;
  std::vector<GraphNode> nodes;

  int output_node() const { return static_cast<int>(nodes.size()) - 1; }
};

std::vector<Violation> validate_graph(const PrimitiveGraph& g);
std::uint64_t graph_params(const PrimitiveGraph& g);
std::uint64_t graph_macs(const PrimitiveGraph& g);

// ------------------------------------------------------------- rationals --

// Exact ratio type for expansion factors and channel multipliers. Always
// normalized: gcd(num, den) = 1, den > 0.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  Rational() = default;
  Rational(std::int64_t n, std::int64_t d);

  bool operator==(const Rational&) const = default;
  bool is_integer() const { return den == 1; }
  double value() const { return static_cast<double>(num) / den; }

  // num*x/den when it divides exactly.
  std::optional<std::int64_t> times_exact(std::int64_t x) const;
};

std::string to_string(const Rational& r);
std::optional<Rational> parse_rational(const std::string& text);  // "3", "1/2"

// ------------------------------------------------------------ IBN blocks --

// Inverted-bottleneck family. Expansion stages widen in_c by the rational
// factor m, a spatial k x k stage carries the stride, a pointwise stage
// projects back down. The group-convolution members replace part or all of
// the expansion with a grouped k x k kernel.
enum class IbnVariant : std::uint8_t {
  kDepthwise,      // pointwise expand, depthwise k x k, pointwise project
  kFused,          // full k x k expand, pointwise project
  kGeneralizedGc,  // pointwise (xn), grouped k x k (xp), pointwise project
  kGc,             // grouped k x k (xm), pointwise project
};

const char* ibn_variant_name(IbnVariant v);
std::optional<IbnVariant> parse_ibn_variant(const std::string& name);
bool variant_uses_groups(IbnVariant v);

struct IbnSpec {
  IbnVariant variant = IbnVariant::kDepthwise;
  int in_c = 0;
  int out_c = 0;
  int k = 3;
  int stride = 1;
  Rational expansion{1, 1};  // m; m * in_c must be an integer
  int split_n = 0;           // GeneralizedGc only: n * p = m, both integer
  int split_p = 0;
  int groups = 0;            // group count g, GC variants only
  bool use_residual = false;
};

// Structural validation. min_group_size bounds (GC input channels / g);
// pass 1 to check only the hard invariants.
std::vector<Violation> validate_block(const IbnSpec& spec, int min_group_size);

// Lowers one block to primitives at the given input spatial dims. Pointwise
// stages with ratio 1 are elided; a grouped stage with g=1 lowers to the
// full convolution it degenerates into. Throws ValidationError on an
// invalid spec.
PrimitiveGraph lower_ibn(const IbnSpec& spec, int in_h, int in_w);

// Rewrites one GroupConv2d as g parallel (slice, full conv, concat)
// branches. Parameter and MAC totals are preserved exactly; g=1 collapses
// to the single equivalent Conv2d.
PrimitiveGraph decompose_gc(const PrimitiveOp& gc);

// ----------------------------------------------------------------- model --

// A model is an input shape plus a chain of stages: IBN blocks, with plain
// convolutions permitted for stems and classifier stubs.
struct PlainConv {
  OpKind kind = OpKind::kConv2d;  // kConv2d or kPointwise
  int in_c = 0;
  int out_c = 0;
  int k = 3;
  int stride = 1;
};

using ModelItem = std::variant<IbnSpec, PlainConv>;

struct ModelIr {
  std::string name;
  TensorShape input;
  std::vector<ModelItem> items;
};

// Chain checks: first stage consumes input.c, each stage consumes its
// predecessor's out_c, every block passes validate_block. Violations carry
// the stage index in their context.
std::vector<Violation> validate_model(const ModelIr& m);

// Lowers the whole chain to one graph; node names are prefixed "b<i>/".
// Throws ValidationError when validate_model reports anything.
PrimitiveGraph lower_model(const ModelIr& m);

}  // namespace nasforge::ir
