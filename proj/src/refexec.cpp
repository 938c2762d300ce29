// SPDX-License-Identifier: Apache-2.0
#include "nasforge/refexec.hpp"

#include <cmath>
#include <stdexcept>

#include "nasforge/errors.hpp"
#include "nasforge/rng.hpp"

namespace nasforge::refexec {

namespace {

void require(bool cond, const std::string& message) {
  if (!cond) throw std::invalid_argument(message);
}

// Leading-edge pad under "same" semantics.
int pad_before(int in, int out, int k, int stride) {
  const int total = (out - 1) * stride + k - in;
  return total > 0 ? total / 2 : 0;
}

// Unified grouped convolution; covers full (g=1), grouped, and depthwise
// (g=c) cases through the weight layout alone.
DenseTensor conv(const ir::PrimitiveOp& op, const DenseTensor& in,
                 const std::vector<double>& weights, int groups) {
  const int cig = op.in.c / groups;
  const int cog = op.out.c / groups;
  require(static_cast<std::size_t>(op.k) * op.k * cig * op.out.c ==
              weights.size(),
          "weight buffer does not match op geometry");

  DenseTensor out = make_tensor(op.out);
  const int py = pad_before(op.in.h, op.out.h, op.k, op.stride);
  const int px = pad_before(op.in.w, op.out.w, op.k, op.stride);

  for (int oy = 0; oy < op.out.h; ++oy) {
    for (int ox = 0; ox < op.out.w; ++ox) {
      for (int oc = 0; oc < op.out.c; ++oc) {
        const int gi = oc / cog;
        double acc = 0.0;
        for (int ky = 0; ky < op.k; ++ky) {
          const int iy = oy * op.stride - py + ky;
          if (iy < 0 || iy >= op.in.h) continue;
          for (int kx = 0; kx < op.k; ++kx) {
            const int ix = ox * op.stride - px + kx;
            if (ix < 0 || ix >= op.in.w) continue;
            for (int ic = 0; ic < cig; ++ic) {
              const std::size_t widx =
                  ((static_cast<std::size_t>(ky) * op.k + kx) * cig + ic) *
                      op.out.c +
                  oc;
              acc += in.at(iy, ix, gi * cig + ic) * weights[widx];
            }
          }
        }
        out.at(oy, ox, oc) = acc;
      }
    }
  }
  return out;
}

}  // namespace

DenseTensor make_tensor(const ir::TensorShape& shape) {
  DenseTensor t;
  t.shape = shape;
  t.data.assign(static_cast<std::size_t>(shape.elems()), 0.0);
  return t;
}

DenseTensor gen_random_tensor(const ir::TensorShape& shape,
                              std::uint64_t seed) {
  DenseTensor t = make_tensor(shape);
  SplitMix64 rng(seed);
  for (double& v : t.data) v = rng.symmetric();
  return t;
}

std::vector<double> gen_random_weights(const ir::PrimitiveOp& op,
                                       std::uint64_t seed) {
  const std::uint64_t n = ir::count_params(op);
  std::vector<double> w(n);
  SplitMix64 rng(seed);
  for (double& v : w) v = rng.symmetric();
  return w;
}

WeightSet gen_graph_weights(const ir::PrimitiveGraph& g, std::uint64_t seed) {
  WeightSet ws;
  for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
    const ir::PrimitiveOp& op = g.nodes[i].op;
    if (ir::is_conv_kind(op.kind))
      ws[i] = gen_random_weights(op, substream_seed(seed, i));
  }
  return ws;
}

DenseTensor exec_op(const ir::PrimitiveOp& op,
                    const std::vector<DenseTensor>& inputs,
                    const std::vector<double>& weights) {
  for (const ir::Violation& v : ir::validate_op(op))
    throw ValidationError(v.context + ": " + v.message);

  switch (op.kind) {
    case ir::OpKind::kConv2d:
    case ir::OpKind::kPointwise:
      require(inputs.size() == 1, "conv takes one input");
      require(inputs[0].shape == op.in, "input shape mismatch");
      return conv(op, inputs[0], weights, 1);
    case ir::OpKind::kDepthwiseConv2d:
      require(inputs.size() == 1, "conv takes one input");
      require(inputs[0].shape == op.in, "input shape mismatch");
      return conv(op, inputs[0], weights, op.in.c);
    case ir::OpKind::kGroupConv2d:
      require(inputs.size() == 1, "conv takes one input");
      require(inputs[0].shape == op.in, "input shape mismatch");
      return conv(op, inputs[0], weights, op.groups);
    case ir::OpKind::kSliceChannels: {
      require(inputs.size() == 1, "slice takes one input");
      require(inputs[0].shape == op.in, "input shape mismatch");
      DenseTensor out = make_tensor(op.out);
      for (int y = 0; y < op.out.h; ++y)
        for (int x = 0; x < op.out.w; ++x)
          for (int c = op.slice_begin; c < op.slice_end; ++c)
            out.at(y, x, c - op.slice_begin) = inputs[0].at(y, x, c);
      return out;
    }
    case ir::OpKind::kConcatChannels: {
      require(inputs.size() >= 2, "concat takes two or more inputs");
      DenseTensor out = make_tensor(op.out);
      int base = 0;
      for (const DenseTensor& in : inputs) {
        require(in.shape.h == op.out.h && in.shape.w == op.out.w,
                "concat spatial mismatch");
        for (int y = 0; y < in.shape.h; ++y)
          for (int x = 0; x < in.shape.w; ++x)
            for (int c = 0; c < in.shape.c; ++c)
              out.at(y, x, base + c) = in.at(y, x, c);
        base += in.shape.c;
      }
      require(base == op.out.c, "concat channel total mismatch");
      return out;
    }
    case ir::OpKind::kResidualAdd: {
      require(inputs.size() == 2, "residual add takes two inputs");
      require(inputs[0].shape == inputs[1].shape &&
                  inputs[0].shape == op.out,
              "residual shape mismatch");
      DenseTensor out = inputs[0];
      for (std::size_t i = 0; i < out.data.size(); ++i)
        out.data[i] += inputs[1].data[i];
      return out;
    }
  }
  throw std::logic_error("unreachable op kind");
}

DenseTensor exec_graph(const ir::PrimitiveGraph& g, const DenseTensor& input,
                       const WeightSet& weights) {
  for (const ir::Violation& v : ir::validate_graph(g))
    throw ValidationError(v.context + ": " + v.message);
  require(input.shape == g.input, "graph input shape mismatch");

  static const std::vector<double> kNoWeights;
  std::vector<DenseTensor> results;
  results.reserve(g.nodes.size());
  for (int i = 0; i < static_cast<int>(g.nodes.size()); ++i) {
    const ir::GraphNode& node = g.nodes[i];
    std::vector<DenseTensor> ins;
    ins.reserve(node.inputs.size());
    for (int ref : node.inputs)
      ins.push_back(ref == ir::kGraphInput ? input : results[ref]);
    const auto it = weights.find(i);
    results.push_back(
        exec_op(node.op, ins, it == weights.end() ? kNoWeights : it->second));
  }
  return results.back();
}

double max_abs_diff(const DenseTensor& a, const DenseTensor& b) {
  require(a.shape == b.shape, "shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.data.size(); ++i)
    worst = std::max(worst, std::fabs(a.data[i] - b.data[i]));
  return worst;
}

std::vector<std::vector<double>> split_gc_weights(
    const ir::PrimitiveOp& gc, const std::vector<double>& weights) {
  require(gc.kind == ir::OpKind::kGroupConv2d, "expects group conv");
  const int g = gc.groups;
  const int cig = gc.in.c / g;
  const int cog = gc.out.c / g;
  require(weights.size() == static_cast<std::size_t>(gc.k) * gc.k * cig *
                                gc.out.c,
          "weight buffer does not match op geometry");

  // Branch gi keeps the c_out columns [gi*cog, (gi+1)*cog).
  std::vector<std::vector<double>> branches(
      g, std::vector<double>(static_cast<std::size_t>(gc.k) * gc.k * cig * cog));
  for (int ky = 0; ky < gc.k; ++ky)
    for (int kx = 0; kx < gc.k; ++kx)
      for (int ic = 0; ic < cig; ++ic) {
        const std::size_t row =
            (static_cast<std::size_t>(ky) * gc.k + kx) * cig + ic;
        for (int gi = 0; gi < g; ++gi)
          for (int oc = 0; oc < cog; ++oc)
            branches[gi][row * cog + oc] =
                weights[row * gc.out.c + gi * cog + oc];
      }
  return branches;
}

}  // namespace nasforge::refexec
