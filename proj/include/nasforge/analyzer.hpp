// SPDX-License-Identifier: Apache-2.0
//
// Block-level what-if analysis: sweep the IBN variants across input shapes
// and kernel/expansion/group menus, compare each row against the matched
// depthwise-IBN baseline, and distill dominance findings into menu filter
// rules. Reports (CSV, SVG scatter) are byte-deterministic.
#pragma once

#include <string>
#include <vector>

#include "nasforge/cost.hpp"
#include "nasforge/ir.hpp"
#include "nasforge/space.hpp"

namespace nasforge::analyzer {

struct SweepRequest {
  std::vector<ir::TensorShape> shapes;     // block input shapes
  std::vector<ir::IbnVariant> variants;
  std::vector<int> kernels;
  std::vector<ir::Rational> expansions;
  int min_group_size = space::kMinGroupSize;
};

// One swept block configuration. Blocks are width-preserving (out_c =
// in_c, stride 1, no residual) so rows isolate the kernel economics.
// group_count/group_size are 0 for ungrouped variants, split_n/split_p 0
// for everything but the generalized grouped form. Ratios compare against
// the depthwise-IBN row with the same shape, kernel and expansion.
struct SweepPoint {
  ir::IbnVariant variant = ir::IbnVariant::kDepthwise;
  ir::TensorShape shape;
  int k = 3;
  ir::Rational m{1, 1};
  int split_n = 0;
  int split_p = 0;
  int group_count = 0;
  int group_size = 0;
  std::uint64_t params = 0;
  std::uint64_t macs = 0;
  double latency_us = 0.0;
  double utilization = 0.0;
  double energy_mj = 0.0;
  double param_ratio = 1.0;
  double latency_ratio = 1.0;
};

// Grouped rows enumerate every group count that divides both grouped-stage
// channel counts with group size >= min_group_size (g=1 included, the
// full-conv degenerate). Throws ValidationError when a depthwise baseline
// cannot be built.
std::vector<SweepPoint> run_block_sweep(const SweepRequest& req,
                                        const cost::AcceleratorConfig& cfg);

// Menus for the `analyze` entry point when the shapes file leaves them out.
SweepRequest default_sweep_request();

// Drops a variant in a shape regime when every one of its swept rows is
// beaten on latency (by more than latency_margin, >= 1.0) by some other
// variant's row that holds at least as many parameters. Such rows are off
// the latency/params pareto front, so pruning them cannot lose an optimum.
std::vector<space::FilterRule> recommend_filters(
    const std::vector<SweepPoint>& table, double latency_margin = 1.0);

// Shape-regime descriptors for the rules above: rule i applies to rows
// whose input shape equals regime i. block_index in the returned rules is
// the index into this regime list; remap it before applying to a space.
std::vector<ir::TensorShape> filter_regimes(
    const std::vector<SweepPoint>& table);

// ---------------------------------------------------------------- report --

// Column order is fixed and documented in the header line.
std::string sweep_to_csv(const std::vector<SweepPoint>& table);
std::vector<SweepPoint> sweep_from_csv(const std::string& text);

struct ScatterPoint {
  double x = 0.0;  // latency_us
  double y = 0.0;  // quality or params
  std::string label;
};

// Standalone SVG scatter with the nondominated front (min x, max y) drawn
// as a polyline. Byte-deterministic for identical input.
std::string scatter_svg(const std::vector<ScatterPoint>& points,
                        const std::string& x_label,
                        const std::string& y_label);

}  // namespace nasforge::analyzer
