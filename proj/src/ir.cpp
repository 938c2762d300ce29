// SPDX-License-Identifier: Apache-2.0
#include "nasforge/ir.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "nasforge/errors.hpp"

namespace nasforge::ir {

namespace {

std::string fmt_ctx(const char* what, int index) {
  return std::string(what) + "[" + std::to_string(index) + "]";
}

void require(bool cond, const std::string& message) {
  if (!cond) throw std::invalid_argument(message);
}

}  // namespace

// ---------------------------------------------------------------- shapes --

std::string to_string(const TensorShape& s) {
  return std::to_string(s.h) + "x" + std::to_string(s.w) + "x" +
         std::to_string(s.c);
}

TensorShape conv_output_shape(const TensorShape& in, int k, int stride,
                              int out_c) {
  require(in.h > 0 && in.w > 0 && in.c > 0, "input shape must be positive");
  require(k > 0 && k % 2 == 1, "kernel must be odd and positive");
  require(stride == 1 || stride == 2, "stride must be 1 or 2");
  require(out_c > 0, "output channels must be positive");
  return TensorShape{(in.h + stride - 1) / stride, (in.w + stride - 1) / stride,
                     out_c};
}

// ------------------------------------------------------------ primitives --

const char* op_kind_name(OpKind kind) {
  switch (kind) {
    case OpKind::kConv2d: return "conv2d";
    case OpKind::kDepthwiseConv2d: return "depthwise_conv2d";
    case OpKind::kGroupConv2d: return "group_conv2d";
    case OpKind::kPointwise: return "pointwise";
    case OpKind::kSliceChannels: return "slice_channels";
    case OpKind::kConcatChannels: return "concat_channels";
    case OpKind::kResidualAdd: return "residual_add";
  }
  return "?";
}

bool is_conv_kind(OpKind kind) {
  switch (kind) {
    case OpKind::kConv2d:
    case OpKind::kDepthwiseConv2d:
    case OpKind::kGroupConv2d:
    case OpKind::kPointwise:
      return true;
    default:
      return false;
  }
}

std::vector<Violation> validate_op(const PrimitiveOp& op) {
  std::vector<Violation> out;
  const std::string ctx = op.name.empty() ? op_kind_name(op.kind) : op.name;
  auto bad = [&](const std::string& msg) { out.push_back({ctx, msg}); };

  if (op.in.h <= 0 || op.in.w <= 0 || op.in.c <= 0 || op.out.c <= 0) {
    bad("shape dims must be positive");
    return out;
  }

  if (is_conv_kind(op.kind)) {
    if (op.k <= 0 || op.k % 2 == 0) bad("kernel must be odd and positive");
    if (op.stride != 1 && op.stride != 2) bad("stride must be 1 or 2");
    if (op.k > 0 && op.k % 2 == 1 && (op.stride == 1 || op.stride == 2)) {
      const TensorShape expect =
          conv_output_shape(op.in, op.k, op.stride, op.out.c);
      if (expect.h != op.out.h || expect.w != op.out.w)
        bad("output spatial dims do not match same-padding rule");
    }
  }

  switch (op.kind) {
    case OpKind::kConv2d:
      if (op.groups != 1) bad("conv2d requires groups = 1");
      break;
    case OpKind::kPointwise:
      if (op.k != 1) bad("pointwise requires k = 1");
      if (op.groups != 1) bad("pointwise requires groups = 1");
      break;
    case OpKind::kDepthwiseConv2d:
      if (op.in.c != op.out.c) bad("depthwise requires in.c = out.c");
      if (op.groups != 1) bad("depthwise carries no explicit group count");
      break;
    case OpKind::kGroupConv2d:
      if (op.groups < 1) {
        bad("group count must be positive");
      } else {
        if (op.in.c % op.groups != 0)
          bad("group count " + std::to_string(op.groups) +
              " does not divide input channels " + std::to_string(op.in.c));
        if (op.out.c % op.groups != 0)
          bad("group count " + std::to_string(op.groups) +
              " does not divide output channels " + std::to_string(op.out.c));
      }
      break;
    case OpKind::kSliceChannels:
      if (op.slice_begin < 0 || op.slice_end <= op.slice_begin ||
          op.slice_end > op.in.c)
        bad("slice range out of bounds");
      if (op.out.c != op.slice_end - op.slice_begin)
        bad("slice output channels must equal range width");
      if (op.out.h != op.in.h || op.out.w != op.in.w)
        bad("slice preserves spatial dims");
      break;
    case OpKind::kConcatChannels:
      if (op.out.h != op.in.h || op.out.w != op.in.w)
        bad("concat preserves spatial dims");
      if (op.out.c != op.in.c)
        bad("concat output channels must equal summed input channels");
      break;
    case OpKind::kResidualAdd:
      if (!(op.in == op.out)) bad("residual add requires equal shapes");
      break;
  }
  return out;
}

std::uint64_t count_params(const PrimitiveOp& op) {
  if (!is_conv_kind(op.kind)) return 0;
  const auto k2 = static_cast<std::uint64_t>(op.k) * op.k;
  switch (op.kind) {
    case OpKind::kConv2d:
    case OpKind::kPointwise:
      return k2 * op.in.c * op.out.c;
    case OpKind::kDepthwiseConv2d:
      require(op.in.c == op.out.c, "depthwise requires in.c = out.c");
      return k2 * op.in.c;
    case OpKind::kGroupConv2d: {
      require(op.groups >= 1, "group count must be positive");
      require(op.in.c % op.groups == 0,
              "group count must divide input channels");
      require(op.out.c % op.groups == 0,
              "group count must divide output channels");
      const std::uint64_t cig = op.in.c / op.groups;
      const std::uint64_t cog = op.out.c / op.groups;
      return k2 * cig * cog * op.groups;
    }
    default:
      return 0;
  }
}

std::uint64_t count_macs(const PrimitiveOp& op) {
  if (!is_conv_kind(op.kind)) return 0;
  return static_cast<std::uint64_t>(op.out.h) * op.out.w * count_params(op);
}

ActBytes count_act_bytes(const PrimitiveOp& op, int bytes_per_elem) {
  require(bytes_per_elem > 0, "bytes_per_elem must be positive");
  const auto bpe = static_cast<std::uint64_t>(bytes_per_elem);
  const std::uint64_t in_vol = static_cast<std::uint64_t>(op.in.elems());
  const std::uint64_t out_vol = static_cast<std::uint64_t>(op.out.elems());
  switch (op.kind) {
    case OpKind::kSliceChannels:
      // Only the selected range is touched.
      return {out_vol * bpe, out_vol * bpe};
    case OpKind::kResidualAdd:
      return {2 * in_vol * bpe, out_vol * bpe};
    default:
      return {in_vol * bpe, out_vol * bpe};
  }
}

// ----------------------------------------------------------------- graph --

std::vector<Violation> validate_graph(const PrimitiveGraph& g) {
  std::vector<Violation> out;
  if (g.input.h <= 0 || g.input.w <= 0 || g.input.c <= 0)
    out.push_back({"graph", "input shape must be positive"});
  if (g.nodes.empty()) out.push_back({"graph", "graph has no nodes"});

  auto shape_of = [&](int ref) -> TensorShape {
    return ref == kGraphInput ? g.input : g.nodes[ref].op.out;
  };

  for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
    const GraphNode& node = g.nodes[i];
    const std::string ctx = fmt_ctx("node", i);
    for (int ref : node.inputs) {
      if (ref != kGraphInput && (ref < 0 || ref >= i)) {
        out.push_back({ctx, "input reference breaks topological order"});
        return out;
      }
    }

    const std::size_t arity = node.inputs.size();
    const OpKind kind = node.op.kind;
    if (kind == OpKind::kConcatChannels) {
      if (arity < 2) {
        out.push_back({ctx, "concat needs at least two inputs"});
        continue;
      }
      int csum = 0;
      bool spatial_ok = true;
      const TensorShape first = shape_of(node.inputs[0]);
      for (int ref : node.inputs) {
        const TensorShape s = shape_of(ref);
        csum += s.c;
        spatial_ok = spatial_ok && s.h == first.h && s.w == first.w;
      }
      if (!spatial_ok)
        out.push_back({ctx, "concat inputs disagree on spatial dims"});
      if (node.op.in.c != csum || node.op.in.h != first.h ||
          node.op.in.w != first.w)
        out.push_back({ctx, "concat aggregate input shape mismatch"});
    } else if (kind == OpKind::kResidualAdd) {
      if (arity != 2) {
        out.push_back({ctx, "residual add needs exactly two inputs"});
        continue;
      }
      const TensorShape a = shape_of(node.inputs[0]);
      const TensorShape b = shape_of(node.inputs[1]);
      if (!(a == b)) out.push_back({ctx, "residual operands differ in shape"});
      if (!(node.op.in == a))
        out.push_back({ctx, "residual op shape mismatch"});
    } else {
      if (arity != 1) {
        out.push_back({ctx, "single-input op has wrong arity"});
        continue;
      }
      if (!(shape_of(node.inputs[0]) == node.op.in))
        out.push_back({ctx, "input shape does not match producer output"});
    }

    for (Violation& v : validate_op(node.op))
      out.push_back({ctx + "/" + v.context, v.message});
  }
  return out;
}

std::uint64_t graph_params(const PrimitiveGraph& g) {
  std::uint64_t total = 0;
  for (const GraphNode& n : g.nodes) total += count_params(n.op);
  return total;
}

std::uint64_t graph_macs(const PrimitiveGraph& g) {
  std::uint64_t total = 0;
  for (const GraphNode& n : g.nodes) total += count_macs(n.op);
  return total;
}

// ------------------------------------------------------------- rationals --

Rational::Rational(std::int64_t n, std::int64_t d) : num(n), den(d) {
  require(den != 0, "rational with zero denominator");
  if (den < 0) {
    num = -num;
    den = -den;
  }
  const std::int64_t g = std::gcd(num < 0 ? -num : num, den);
  if (g > 1) {
    num /= g;
    den /= g;
  }
}

std::optional<std::int64_t> Rational::times_exact(std::int64_t x) const {
  const std::int64_t scaled = num * x;
  if (scaled % den != 0) return std::nullopt;
  return scaled / den;
}

std::string to_string(const Rational& r) {
  if (r.den == 1) return std::to_string(r.num);
  return std::to_string(r.num) + "/" + std::to_string(r.den);
}

std::optional<Rational> parse_rational(const std::string& text) {
  if (text.empty()) return std::nullopt;
  const auto slash = text.find('/');
  try {
    std::size_t used = 0;
    if (slash == std::string::npos) {
      const long long n = std::stoll(text, &used);
      if (used != text.size()) return std::nullopt;
      return Rational{n, 1};
    }
    const std::string lhs = text.substr(0, slash);
    const std::string rhs = text.substr(slash + 1);
    if (lhs.empty() || rhs.empty()) return std::nullopt;
    const long long n = std::stoll(lhs, &used);
    if (used != lhs.size()) return std::nullopt;
    const long long d = std::stoll(rhs, &used);
    if (used != rhs.size() || d == 0) return std::nullopt;
    return Rational{n, d};
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

// ------------------------------------------------------------ IBN blocks --

const char* ibn_variant_name(IbnVariant v) {
  switch (v) {
    case IbnVariant::kDepthwise: return "depthwise_ibn";
    case IbnVariant::kFused: return "fused_ibn";
    case IbnVariant::kGeneralizedGc: return "generalized_gc_ibn";
    case IbnVariant::kGc: return "gc_ibn";
  }
  return "?";
}

std::optional<IbnVariant> parse_ibn_variant(const std::string& name) {
  if (name == "depthwise_ibn") return IbnVariant::kDepthwise;
  if (name == "fused_ibn") return IbnVariant::kFused;
  if (name == "generalized_gc_ibn") return IbnVariant::kGeneralizedGc;
  if (name == "gc_ibn") return IbnVariant::kGc;
  return std::nullopt;
}

bool variant_uses_groups(IbnVariant v) {
  return v == IbnVariant::kGeneralizedGc || v == IbnVariant::kGc;
}

std::vector<Violation> validate_block(const IbnSpec& spec,
                                      int min_group_size) {
  std::vector<Violation> out;
  const std::string ctx = ibn_variant_name(spec.variant);
  auto bad = [&](const std::string& msg) { out.push_back({ctx, msg}); };

  if (spec.in_c <= 0 || spec.out_c <= 0) {
    bad("channel counts must be positive");
    return out;
  }
  if (spec.k <= 0 || spec.k % 2 == 0) bad("kernel must be odd and positive");
  if (spec.stride != 1 && spec.stride != 2) bad("stride must be 1 or 2");
  if (spec.expansion.num <= 0) bad("expansion must be positive");

  const std::optional<std::int64_t> expanded =
      spec.expansion.times_exact(spec.in_c);
  if (!expanded) {
    bad("expansion " + to_string(spec.expansion) + " of " +
        std::to_string(spec.in_c) + " channels is not an integer");
    return out;
  }

  if (spec.variant == IbnVariant::kGeneralizedGc) {
    if (spec.split_n < 1 || spec.split_p < 1) {
      bad("split factors must be positive integers");
    } else if (!spec.expansion.is_integer() ||
               static_cast<std::int64_t>(spec.split_n) * spec.split_p !=
                   spec.expansion.num) {
      bad("split factors " + std::to_string(spec.split_n) + "*" +
          std::to_string(spec.split_p) + " must equal expansion " +
          to_string(spec.expansion));
    }
  }

  if (variant_uses_groups(spec.variant)) {
    // The grouped stage consumes in_c directly for the fused form, or the
    // n-times widened tensor for the generalized form.
    const std::int64_t gc_in =
        spec.variant == IbnVariant::kGc
            ? spec.in_c
            : static_cast<std::int64_t>(spec.split_n) * spec.in_c;
    const std::int64_t gc_out = *expanded;
    if (spec.groups < 1) {
      bad("group count must be positive");
    } else if (spec.split_n >= 1 || spec.variant == IbnVariant::kGc) {
      if (gc_in % spec.groups != 0)
        bad("group count " + std::to_string(spec.groups) +
            " does not divide grouped-stage input channels " +
            std::to_string(gc_in));
      else if (gc_out % spec.groups != 0)
        bad("group count " + std::to_string(spec.groups) +
            " does not divide grouped-stage output channels " +
            std::to_string(gc_out));
      else {
        const std::int64_t group_size = gc_in / spec.groups;
        if (group_size < min_group_size)
          bad("group size " + std::to_string(group_size) + " < " +
              std::to_string(min_group_size));
      }
    }
  } else {
    if (spec.groups != 0) bad("group count only applies to grouped variants");
    if (spec.split_n != 0 || spec.split_p != 0)
      bad("split factors only apply to the generalized grouped variant");
  }

  if (spec.use_residual) {
    if (spec.stride != 1)
      bad("residual skip requires unit stride");
    else if (spec.in_c != spec.out_c)
      bad("residual skip requires in_c = out_c");
  }
  return out;
}

namespace {

// Appends a node and returns its index.
int push_node(PrimitiveGraph& g, PrimitiveOp op, std::vector<int> inputs) {
  g.nodes.push_back({std::move(op), std::move(inputs)});
  return static_cast<int>(g.nodes.size()) - 1;
}

PrimitiveOp make_pointwise(const TensorShape& in, int out_c,
                           const std::string& name) {
  PrimitiveOp op;
  op.kind = OpKind::kPointwise;
  op.in = in;
  op.out = TensorShape{in.h, in.w, out_c};
  op.k = 1;
  op.stride = 1;
  op.name = name;
  return op;
}

}  // namespace

PrimitiveGraph lower_ibn(const IbnSpec& spec, int in_h, int in_w) {
  const std::vector<Violation> v = validate_block(spec, 1);
  if (!v.empty())
    throw ValidationError(v.front().context + ": " + v.front().message);
  require(in_h > 0 && in_w > 0, "input spatial dims must be positive");

  const int expanded = static_cast<int>(*spec.expansion.times_exact(spec.in_c));
  PrimitiveGraph g;
  g.input = TensorShape{in_h, in_w, spec.in_c};

  int cur = kGraphInput;
  TensorShape cur_shape = g.input;
  auto advance = [&](PrimitiveOp op) {
    cur = push_node(g, op, {cur});
    cur_shape = g.nodes[cur].op.out;
  };

  auto spatial = [&](OpKind kind, int out_c, int groups,
                     const std::string& name) {
    PrimitiveOp op;
    // A grouped stage with one group is exactly the full convolution.
    op.kind = (kind == OpKind::kGroupConv2d && groups == 1) ? OpKind::kConv2d
                                                            : kind;
    op.groups = op.kind == OpKind::kGroupConv2d ? groups : 1;
    op.in = cur_shape;
    op.out = conv_output_shape(cur_shape, spec.k, spec.stride, out_c);
    op.k = spec.k;
    op.stride = spec.stride;
    op.name = name;
    advance(op);
  };

  switch (spec.variant) {
    case IbnVariant::kDepthwise:
      if (expanded != spec.in_c)
        advance(make_pointwise(cur_shape, expanded, "expand"));
      spatial(OpKind::kDepthwiseConv2d, expanded, 1, "kernel");
      break;
    case IbnVariant::kFused:
      spatial(OpKind::kConv2d, expanded, 1, "kernel");
      break;
    case IbnVariant::kGeneralizedGc: {
      const int widened = spec.split_n * spec.in_c;
      if (widened != spec.in_c)
        advance(make_pointwise(cur_shape, widened, "expand"));
      spatial(OpKind::kGroupConv2d, expanded, spec.groups, "kernel");
      break;
    }
    case IbnVariant::kGc:
      spatial(OpKind::kGroupConv2d, expanded, spec.groups, "kernel");
      break;
  }

  if (cur_shape.c != spec.out_c)
    advance(make_pointwise(cur_shape, spec.out_c, "project"));

  if (spec.use_residual) {
    PrimitiveOp add;
    add.kind = OpKind::kResidualAdd;
    add.in = cur_shape;
    add.out = cur_shape;
    add.name = "add";
    push_node(g, add, {kGraphInput, cur});
  }
  return g;
}

PrimitiveGraph decompose_gc(const PrimitiveOp& gc) {
  require(gc.kind == OpKind::kGroupConv2d, "decompose_gc expects group conv");
  for (const Violation& v : validate_op(gc))
    throw ValidationError(v.context + ": " + v.message);

  PrimitiveGraph g;
  g.input = gc.in;

  if (gc.groups == 1) {
    PrimitiveOp full = gc;
    full.kind = OpKind::kConv2d;
    full.groups = 1;
    full.name = gc.name.empty() ? "conv" : gc.name;
    push_node(g, full, {kGraphInput});
    return g;
  }

  const int cig = gc.in.c / gc.groups;
  const int cog = gc.out.c / gc.groups;
  std::vector<int> branch_outputs;
  branch_outputs.reserve(gc.groups);
  for (int gi = 0; gi < gc.groups; ++gi) {
    PrimitiveOp slice;
    slice.kind = OpKind::kSliceChannels;
    slice.in = gc.in;
    slice.out = TensorShape{gc.in.h, gc.in.w, cig};
    slice.slice_begin = gi * cig;
    slice.slice_end = (gi + 1) * cig;
    slice.name = "slice" + std::to_string(gi);
    const int s = push_node(g, slice, {kGraphInput});

    PrimitiveOp conv;
    conv.kind = OpKind::kConv2d;
    conv.in = slice.out;
    conv.out = TensorShape{gc.out.h, gc.out.w, cog};
    conv.k = gc.k;
    conv.stride = gc.stride;
    conv.name = "conv" + std::to_string(gi);
    branch_outputs.push_back(push_node(g, conv, {s}));
  }

  PrimitiveOp concat;
  concat.kind = OpKind::kConcatChannels;
  concat.in = gc.out;
  concat.out = gc.out;
  concat.name = "concat";
  push_node(g, concat, std::move(branch_outputs));
  return g;
}

// ----------------------------------------------------------------- model --

std::vector<Violation> validate_model(const ModelIr& m) {
  std::vector<Violation> out;
  if (m.input.h <= 0 || m.input.w <= 0 || m.input.c <= 0)
    out.push_back({"input", "input shape must be positive"});
  if (m.items.empty()) out.push_back({"items", "model has no stages"});
  if (!out.empty()) return out;

  int carried_c = m.input.c;
  for (int i = 0; i < static_cast<int>(m.items.size()); ++i) {
    const std::string ctx = fmt_ctx("b", i);
    const int declared_in =
        std::holds_alternative<IbnSpec>(m.items[i])
            ? std::get<IbnSpec>(m.items[i]).in_c
            : std::get<PlainConv>(m.items[i]).in_c;
    if (declared_in != carried_c)
      out.push_back({ctx, "stage consumes " + std::to_string(declared_in) +
                              " channels but predecessor produces " +
                              std::to_string(carried_c)});

    if (std::holds_alternative<IbnSpec>(m.items[i])) {
      const IbnSpec& spec = std::get<IbnSpec>(m.items[i]);
      for (Violation& v : validate_block(spec, 1))
        out.push_back({ctx + "/" + v.context, v.message});
      carried_c = spec.out_c;
    } else {
      const PlainConv& pc = std::get<PlainConv>(m.items[i]);
      if (pc.kind != OpKind::kConv2d && pc.kind != OpKind::kPointwise)
        out.push_back({ctx, "plain stages must be conv2d or pointwise"});
      if (pc.in_c <= 0 || pc.out_c <= 0)
        out.push_back({ctx, "channel counts must be positive"});
      if (pc.k <= 0 || pc.k % 2 == 0)
        out.push_back({ctx, "kernel must be odd and positive"});
      if (pc.kind == OpKind::kPointwise && pc.k != 1)
        out.push_back({ctx, "pointwise requires k = 1"});
      if (pc.stride != 1 && pc.stride != 2)
        out.push_back({ctx, "stride must be 1 or 2"});
      carried_c = pc.out_c;
    }
  }
  return out;
}

PrimitiveGraph lower_model(const ModelIr& m) {
  const std::vector<Violation> v = validate_model(m);
  if (!v.empty())
    throw ValidationError(v.front().context + ": " + v.front().message);

  PrimitiveGraph g;
  g.input = m.input;
  int tail = kGraphInput;
  TensorShape tail_shape = m.input;

  for (int i = 0; i < static_cast<int>(m.items.size()); ++i) {
    const std::string prefix = "b" + std::to_string(i) + "/";
    if (std::holds_alternative<PlainConv>(m.items[i])) {
      const PlainConv& pc = std::get<PlainConv>(m.items[i]);
      PrimitiveOp op;
      op.kind = pc.kind;
      op.in = tail_shape;
      op.out = conv_output_shape(tail_shape, pc.k, pc.stride, pc.out_c);
      op.k = pc.k;
      op.stride = pc.stride;
      op.name = prefix + "conv";
      tail = push_node(g, op, {tail});
      tail_shape = op.out;
      continue;
    }

    const IbnSpec& spec = std::get<IbnSpec>(m.items[i]);
    const PrimitiveGraph block = lower_ibn(spec, tail_shape.h, tail_shape.w);
    const int base = static_cast<int>(g.nodes.size());
    const int block_input = tail;
    for (const GraphNode& node : block.nodes) {
      GraphNode copy = node;
      copy.op.name = prefix + copy.op.name;
      for (int& ref : copy.inputs)
        ref = ref == kGraphInput ? block_input : ref + base;
      g.nodes.push_back(std::move(copy));
    }
    tail = g.output_node();
    tail_shape = g.nodes[tail].op.out;
  }
  return g;
}

}  // namespace nasforge::ir
