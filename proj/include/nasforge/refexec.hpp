// SPDX-License-Identifier: Apache-2.0
//
// Slow, obviously-correct reference executor. Direct nested-loop
// convolutions over double tensors; exists to pin down operator semantics
// and to arbitrate rewrites (grouped conv vs its slice/conv/concat form),
// not to run fast.
#pragma once

#include <cstdint>
#include <map>
#include <vector>

#include "nasforge/ir.hpp"

namespace nasforge::refexec {

// Row-major [h][w][c].
struct DenseTensor {
  ir::TensorShape shape;
  std::vector<double> data;

  double& at(int y, int x, int c) {
    return data[(static_cast<std::size_t>(y) * shape.w + x) * shape.c + c];
  }
  double at(int y, int x, int c) const {
    return data[(static_cast<std::size_t>(y) * shape.w + x) * shape.c + c];
  }
};

DenseTensor make_tensor(const ir::TensorShape& shape);

// Deterministic fill with SplitMix64-driven uniforms in [-1, 1).
DenseTensor gen_random_tensor(const ir::TensorShape& shape,
                              std::uint64_t seed);

// Per-node conv weights, laid out [k][k][c_in_per_group][c_out] with c_out
// innermost. Output channel oc reads input channels of its group
// (oc / (out.c/g)). Depthwise is the c_in_per_group = 1 case. Non-conv
// nodes hold no weights.
using WeightSet = std::map<int, std::vector<double>>;

std::vector<double> gen_random_weights(const ir::PrimitiveOp& op,
                                       std::uint64_t seed);

// Weights for every conv node of a graph; node i uses substream i of seed.
WeightSet gen_graph_weights(const ir::PrimitiveGraph& g, std::uint64_t seed);

// Executes one op. Convolutions use "same" zero padding: with
// pad_total = (out-1)*stride + k - in, the leading edge gets
// floor(pad_total/2). `weights` may be empty for non-conv kinds.
DenseTensor exec_op(const ir::PrimitiveOp& op,
                    const std::vector<DenseTensor>& inputs,
                    const std::vector<double>& weights);

// Executes a graph in node order and returns the output node's tensor.
DenseTensor exec_graph(const ir::PrimitiveGraph& g, const DenseTensor& input,
                       const WeightSet& weights);

// Largest elementwise |a - b|. Shapes must match.
double max_abs_diff(const DenseTensor& a, const DenseTensor& b);

// Splits a grouped conv's weights into the per-branch weights its
// slice/conv/concat decomposition expects (branch order = group order).
std::vector<std::vector<double>> split_gc_weights(const ir::PrimitiveOp& gc,
                                                  const std::vector<double>&
                                                      weights);

}  // namespace nasforge::refexec
