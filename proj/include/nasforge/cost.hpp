// SPDX-License-Identifier: Apache-2.0
//
// Analytic latency/energy model for a systolic ML accelerator with
// SIMD-aligned channel tiling. Per-op cycle cost is a roofline over three
// ports plus a fixed dispatch overhead:
//
//   cycles = max(macs / (P * u), act_in / B_act, param_bytes / B_param)
//            + C_fix                      (ceiling-rounded)
//
// where u penalizes output-channel groups that fill a channel tile only
// partially. Slice/concat/add ops pay their written bytes on the
// activation port. All divisions are evaluated in exact integer arithmetic
// so results are identical across platforms.
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "nasforge/ir.hpp"

namespace nasforge::cost {

struct AcceleratorConfig {
  std::int64_t mac_per_cycle = 0;       // P: peak MACs per cycle
  double clock_ghz = 0.0;               // f
  std::int64_t act_bw = 0;              // bytes/cycle, activation port
  std::int64_t param_bw = 0;            // bytes/cycle, parameter port
  std::int64_t channel_tile = 0;        // L: SIMD lane width, power of two
  std::int64_t op_overhead_cycles = 0;  // C_fix: per-op dispatch cost
  std::int64_t bytes_per_elem = 0;      // quantized element width
  double e_mac = 0.0;                   // pJ per MAC
  double e_act = 0.0;                   // pJ per activation byte
  double e_param = 0.0;                 // pJ per parameter byte

  // Throws ValidationError on nonpositive fields or a non-power-of-two tile.
  void validate() const;
};

AcceleratorConfig load_accelerator_config(const std::string& path);
AcceleratorConfig parse_accelerator_config(const std::string& json_text);
std::string emit_accelerator_config(const AcceleratorConfig& cfg);

enum class BoundKind : std::uint8_t {
  kCompute,
  kActBandwidth,
  kParamBandwidth,
};
const char* bound_kind_name(BoundKind b);

struct OpMetrics {
  std::string name;
  ir::OpKind kind = ir::OpKind::kConv2d;
  std::uint64_t cycles = 0;
  double latency_us = 0.0;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
  std::uint64_t act_bytes = 0;    // in + out activation traffic
  std::uint64_t param_bytes = 0;
  double utilization = 0.0;       // macs / (cycles * P), 0 for zero-MAC ops
  double energy_mj = 0.0;
  BoundKind bound = BoundKind::kCompute;
};

struct ModelTotals {
  std::uint64_t cycles = 0;
  double latency_us = 0.0;
  std::uint64_t macs = 0;
  std::uint64_t params = 0;
  std::uint64_t act_bytes = 0;
  std::uint64_t param_bytes = 0;
  double utilization = 0.0;
  double energy_mj = 0.0;
};

struct ModelMetrics {
  std::vector<OpMetrics> per_op;
  ModelTotals totals;
};

// Fraction of the channel tile a conv's per-group output width keeps busy:
// u = q / (ceil(q/L) * L) with q = out.c / g. Depthwise has q = 1.
double alignment_utilization(const ir::PrimitiveOp& op,
                             const AcceleratorConfig& cfg);

OpMetrics op_latency(const ir::PrimitiveOp& op, const AcceleratorConfig& cfg);

// (macs*e_mac + act_bytes*e_act + param_bytes*e_param) picojoules, in mJ.
double op_energy(const OpMetrics& m, const AcceleratorConfig& cfg);

ModelMetrics graph_metrics(const ir::PrimitiveGraph& g,
                           const AcceleratorConfig& cfg);
ModelMetrics model_metrics(const ir::ModelIr& m, const AcceleratorConfig& cfg);

// On-device measurement convention: a paced load (kHarnessInfersPerSec)
// averaged over kHarnessWindowInferences, idle power subtracted, charged
// per inference: (avg_mw - idle_mw) * latency_ms gives microjoules.
inline constexpr int kHarnessInfersPerSec = 30;
inline constexpr int kHarnessWindowInferences = 100;

// Millijoules per inference. Throws on avg < idle or negative latency.
double harness_energy_mj(double avg_power_mw, double idle_power_mw,
                         double latency_ms);

}  // namespace nasforge::cost
